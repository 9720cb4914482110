#include "detail/barrier_lp.hpp"

#include "pqtds/errors.hpp"

#include <cmath>
#include <limits>

namespace pqtds::detail {

InequalityLpResult solve_inequality_lp(const Matrix& a, const Vector& b, const Vector& c,
                                       const Vector& x0, double gap_tol, int max_newton) {
  const Eigen::Index m = a.rows();
  InequalityLpResult out;
  out.x = x0;
  Vector s0 = b - a * x0;
  if ((s0.array() <= 0.0).any()) throw InvalidArgument("solve_inequality_lp: x0 not strictly feasible");

  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  const double top = sv.size() > 0 ? sv[0] : 0.0;
  while (rank < sv.size() && sv[rank] > 1e-10 * top) ++rank;
  if (rank == 0 || m == 0) {
    out.objective = c.dot(x0);
    out.converged = true;
    return out;
  }
  const Matrix basis = svd.matrixV().leftCols(rank);
  const Matrix ar = a * basis;
  const Vector cr = basis.transpose() * c;

  Vector y = Vector::Zero(rank);
  auto slack = [&](const Vector& yy) -> Vector { return s0 - ar * yy; };
  auto barrier = [&](double tau, const Vector& yy, const Vector& s) {
    return tau * cr.dot(yy) - s.array().log().sum();
  };

  double tau = 1.0;
  const double md = static_cast<double>(m);
  int steps = 0;
  while (true) {
    for (;;) {
      if (steps >= max_newton) {
        out.x = x0 + basis * y;
        out.objective = c.dot(out.x);
        out.newton_steps = steps;
        return out;
      }
      const Vector s = slack(y);
      const Vector inv = s.cwiseInverse();
      const Vector grad = tau * cr + ar.transpose() * inv;
      const Matrix h = ar.transpose() * inv.cwiseAbs2().asDiagonal() * ar;
      const Vector step = -h.ldlt().solve(grad);
      const double dec = -grad.dot(step);
      ++steps;
      if (!(dec >= 0.0) || dec * 0.5 < 1e-12) break;

      const Vector ds = ar * step;
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (ds[i] > 0.0) alpha = std::min(alpha, 0.99 * s[i] / ds[i]);
      }
      const double f0 = barrier(tau, y, s);
      if (0.5 * dec <= 1e-14 * std::abs(f0)) break;
      while (alpha > 1e-16) {
        const Vector yn = y + alpha * step;
        const Vector sn = slack(yn);
        if ((sn.array() > 0.0).all() && barrier(tau, yn, sn) <= f0 - 0.01 * alpha * dec) {
          y = yn;
          break;
        }
        alpha *= 0.5;
      }
      if (alpha <= 1e-16) break;
    }
    if (md / tau < gap_tol) break;
    tau *= 20.0;
  }
  out.x = x0 + basis * y;
  out.objective = c.dot(out.x);
  out.converged = true;
  out.newton_steps = steps;
  return out;
}

}  // namespace pqtds::detail
