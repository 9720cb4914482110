#include "pqtds/cvxsub.hpp"

#include "detail/hashing.hpp"
#include "detail/rows.hpp"
#include "pqtds/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pqtds {

namespace {

constexpr double kRankTol = 1e-10;

// The subproblem in whitened coordinates:
//   max  a.z  s.t. |z| <= rho,  sum_i w_i |W_i.z| <= b.
struct WhiteProblem {
  Vector a;
  const RowMatrix* rows = nullptr;
  const Vector* weights = nullptr;
  double rho = 0.0;
  double b = 0.0;
};

double abs_mean(const RowMatrix& rows, const Vector& weights, const Vector& z) {
  if (rows.rows() == 0) return 0.0;
  const Vector s = rows * z;
  return weights.dot(s.cwiseAbs());
}

struct WhiteSolution {
  Vector z;
  SolverStatus status = SolverStatus::optimal;
  int steps = 0;
};

Vector ball_point(const Vector& a, double rho) {
  const double n = a.norm();
  return n > 0.0 ? Vector(a * (rho / n)) : Vector(Vector::Zero(a.size()));
}

// Log-barrier path following on (z, t) where t_i bounds |W_i.z|. The t block
// is eliminated analytically, leaving an r x r Newton system per step.
WhiteSolution barrier_solve(const WhiteProblem& p, const SolverOptions& opts) {
  const RowMatrix& w = *p.rows;
  const Vector& om = *p.weights;
  const Eigen::Index r = p.a.size();
  const Eigen::Index n = w.rows();
  const double a_norm = p.a.norm();
  const Vector a = p.a / a_norm;
  const double rho2 = p.rho * p.rho;

  WhiteSolution out;
  Vector z = Vector::Zero(r);
  Vector t = Vector::Constant(n, p.b / (2.0 * om.sum()));

  const double m_constraints = 2.0 * static_cast<double>(n) + 2.0;
  double tau = m_constraints / p.rho;

  auto phi = [&](const Vector& zz, const Vector& tt, double tau_) -> double {
    const Vector s = w * zz;
    const Vector g1 = tt - s;
    const Vector g2 = tt + s;
    const double g3 = p.b - om.dot(tt);
    const double g4 = rho2 - zz.squaredNorm();
    if ((g1.array() <= 0.0).any() || (g2.array() <= 0.0).any() || g3 <= 0.0 || g4 <= 0.0) {
      return std::numeric_limits<double>::infinity();
    }
    return -tau_ * a.dot(zz) - g1.array().log().sum() - g2.array().log().sum() - std::log(g3) -
           std::log(g4);
  };

  int steps = 0;
  for (;;) {
    for (;;) {
      if (steps >= opts.max_newton_steps) {
        out.z = z;
        out.status = SolverStatus::iteration_limit;
        out.steps = steps;
        return out;
      }
      ++steps;
      const Vector s = w * z;
      const Vector g1 = t - s;
      const Vector g2 = t + s;
      const double g3 = p.b - om.dot(t);
      const double g4 = rho2 - z.squaredNorm();
      const Vector i1 = g1.cwiseInverse();
      const Vector i2 = g2.cwiseInverse();
      const Vector d = i1.cwiseAbs2() + i2.cwiseAbs2();
      const Vector e = i2.cwiseAbs2() - i1.cwiseAbs2();
      const Vector schur_diag =
          (4.0 * (g1.cwiseAbs2() + g2.cwiseAbs2()).cwiseInverse()).eval();
      const Vector om_d = om.cwiseQuotient(d);
      const double gamma = g3 * g3 + om.dot(om_d);
      const Vector u = w.transpose() * e.cwiseProduct(om_d);

      const Vector gz = -tau * a + w.transpose() * (i1 - i2) + (2.0 / g4) * z;
      const Vector gt = -i1 - i2 + om / g3;

      auto htt_inv = [&](const Vector& v) -> Vector {
        const Vector vd = v.cwiseQuotient(d);
        return vd - om_d * (om.dot(vd) / gamma);
      };

      Matrix schur = w.transpose() * schur_diag.asDiagonal() * w;
      schur.diagonal().array() += 2.0 / g4;
      schur.noalias() += (4.0 / (g4 * g4)) * z * z.transpose();
      schur.noalias() += (u * u.transpose()) / gamma;

      const Vector rhs = -gz + w.transpose() * e.cwiseProduct(htt_inv(gt));
      Eigen::LLT<Matrix> llt(schur);
      Vector dz;
      if (llt.info() == Eigen::Success) {
        dz = llt.solve(rhs);
      } else {
        dz = schur.ldlt().solve(rhs);
      }
      const Vector dt = htt_inv(-gt - e.cwiseProduct(w * dz));
      const double dec = -(gz.dot(dz) + gt.dot(dt));
      if (!std::isfinite(dec)) {
        out.z = z;
        out.status = SolverStatus::numerical_failure;
        out.steps = steps;
        return out;
      }
      if (dec * 0.5 <= 1e-10) break;

      // Largest step keeping the linear constraints strictly feasible.
      const Vector ds = w * dz;
      const Vector dg1 = dt - ds;
      const Vector dg2 = dt + ds;
      const double dg3 = -om.dot(dt);
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (dg1[i] < 0.0) alpha = std::min(alpha, -0.99 * g1[i] / dg1[i]);
        if (dg2[i] < 0.0) alpha = std::min(alpha, -0.99 * g2[i] / dg2[i]);
      }
      if (dg3 < 0.0) alpha = std::min(alpha, -0.99 * g3 / dg3);

      const double f0 = phi(z, t, tau);
      // Centered to the resolution of the barrier value itself.
      if (0.5 * dec <= 1e-14 * std::abs(f0)) break;
      bool moved = false;
      while (alpha > 1e-14) {
        const Vector zn = z + alpha * dz;
        const Vector tn = t + alpha * dt;
        const double f1 = phi(zn, tn, tau);
        if (f1 <= f0 - 0.01 * alpha * dec) {
          z = zn;
          t = tn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    const double value = a_norm * a.dot(z);
    const double target = 0.25 * opts.opt_tol * std::max(1.0, value) / a_norm;
    if (m_constraints / tau <= target) break;
    tau *= 15.0;
  }
  out.z = z;
  out.status = SolverStatus::optimal;
  out.steps = steps;
  return out;
}

WhiteSolution solve_white(const WhiteProblem& p, const SolverOptions& opts) {
  const Eigen::Index r = p.a.size();
  WhiteSolution out;
  out.status = SolverStatus::closed_form;
  const double a_norm = p.a.norm();
  if (r == 0 || a_norm == 0.0 || p.rho <= 0.0) {
    out.z = Vector::Zero(r);
    return out;
  }
  const RowMatrix& w = *p.rows;
  const Vector& om = *p.weights;
  const bool has_rows = w.rows() > 0 && (om.array() > 0.0).any();
  if (!has_rows) {
    out.z = ball_point(p.a, p.rho);
    return out;
  }
  if (p.b <= 0.0) {
    // Every active row must vanish: optimize over their common null space.
    Eigen::JacobiSVD<Matrix> svd(Matrix(w), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    Eigen::Index k = 0;
    while (k < sv.size() && sv[k] > kRankTol * sv[0]) ++k;
    const Matrix null = svd.matrixV().rightCols(r - k);
    const Vector a_null = null * (null.transpose() * p.a);
    out.z = ball_point(a_null, p.rho);
    return out;
  }
  const Vector z0 = ball_point(p.a, p.rho);
  if (abs_mean(w, om, z0) <= p.b) {
    out.z = z0;
    return out;
  }
  return barrier_solve(p, opts);
}

}  // namespace

double ConstraintSet::quad_value(const Vector& c) const { return c.dot(gram * c); }

double ConstraintSet::abs_value(const Vector& c) const { return abs_mean(abs_rows, abs_weights, c); }

ConstraintSet build_constraint_set_from_rows(BasisPtr basis, const RowMatrix& reference_rows,
                                             std::span<const std::uint8_t> active,
                                             double row_weight, double quad_bound,
                                             double abs_bound) {
  if (!basis) throw InvalidArgument("build_constraint_set: null basis");
  if (reference_rows.rows() == 0) throw EmptySample("build_constraint_set: empty reference sample");
  if (static_cast<std::size_t>(reference_rows.cols()) != basis->size()) {
    throw DimensionMismatch("build_constraint_set: feature rows do not match basis size");
  }
  if (active.size() != static_cast<std::size_t>(reference_rows.rows())) {
    throw DimensionMismatch("build_constraint_set: activity mask length mismatch");
  }
  if (!(row_weight > 0.0)) throw InvalidArgument("build_constraint_set: row weight must be positive");
  if (!(quad_bound >= 0.0) || !(abs_bound >= 0.0)) {
    throw InvalidArgument("build_constraint_set: bounds must be nonnegative");
  }

  ConstraintSet cs;
  cs.basis = basis;
  cs.quad_bound = quad_bound;
  cs.abs_bound = abs_bound;
  cs.row_weight = row_weight;
  const Eigen::Index k = reference_rows.cols();

  const auto all = detail::distinct_rows(reference_rows);
  RowMatrix weighted(static_cast<Eigen::Index>(all.rows.size()), k);
  for (std::size_t g = 0; g < all.rows.size(); ++g) {
    weighted.row(static_cast<Eigen::Index>(g)) =
        std::sqrt(static_cast<double>(all.counts[g]) * row_weight) *
        reference_rows.row(static_cast<Eigen::Index>(all.rows[g]));
  }
  cs.gram = weighted.transpose() * weighted;
  cs.gram = 0.5 * (cs.gram + cs.gram.transpose());

  Eigen::BDCSVD<Matrix> svd(Matrix(weighted), Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > kRankTol * sv[0]) ++rank;
  cs.rank = rank;
  const Matrix v = svd.matrixV().leftCols(rank);
  const Vector sig = sv.head(rank);
  cs.projector = v * v.transpose();
  cs.whiten = sig.asDiagonal() * v.transpose();
  cs.unwhiten = v * sig.cwiseInverse().asDiagonal();

  std::vector<std::size_t> active_idx;
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i]) active_idx.push_back(i);
  }
  RowMatrix active_rows(static_cast<Eigen::Index>(active_idx.size()), k);
  for (std::size_t i = 0; i < active_idx.size(); ++i) {
    active_rows.row(static_cast<Eigen::Index>(i)) =
        reference_rows.row(static_cast<Eigen::Index>(active_idx[i]));
  }
  const auto act = detail::distinct_rows(active_rows);
  cs.abs_rows.resize(static_cast<Eigen::Index>(act.rows.size()), k);
  cs.abs_weights.resize(static_cast<Eigen::Index>(act.rows.size()));
  for (std::size_t g = 0; g < act.rows.size(); ++g) {
    cs.abs_rows.row(static_cast<Eigen::Index>(g)) =
        active_rows.row(static_cast<Eigen::Index>(act.rows[g]));
    cs.abs_weights[static_cast<Eigen::Index>(g)] = static_cast<double>(act.counts[g]) * row_weight;
  }
  cs.abs_rows_white = cs.abs_rows * cs.unwhiten;

  detail::Fnv1a h;
  for (std::size_t g = 0; g < all.rows.size(); ++g) {
    const auto row = reference_rows.row(static_cast<Eigen::Index>(all.rows[g]));
    h.add_doubles({row.data(), static_cast<std::size_t>(k)});
    h.add(static_cast<std::uint64_t>(all.counts[g]));
  }
  for (std::size_t g = 0; g < act.rows.size(); ++g) h.add(static_cast<std::uint64_t>(act.counts[g]));
  h.add_double(row_weight);
  h.add_double(quad_bound);
  h.add_double(abs_bound);
  cs.fingerprint = h.hex();
  return cs;
}

ConstraintSet build_constraint_set(const Classifier& f, const Sample& s, BasisPtr basis,
                                   double beta, double eps, double slack_r) {
  if (s.empty()) throw EmptySample("build_constraint_set: empty sample");
  if (!(beta > 0.0)) throw InvalidArgument("build_constraint_set: beta must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("build_constraint_set: eps must lie in (0,1)");
  if (!(slack_r > 1.0)) throw InvalidArgument("build_constraint_set: R must exceed 1");
  const RowMatrix feats = feature_matrix(*basis, s);
  std::vector<std::uint8_t> active(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) active[i] = static_cast<std::uint8_t>(f(s.point(i)));
  return build_constraint_set_from_rows(std::move(basis), feats, active,
                                        1.0 / static_cast<double>(s.size()), 2.0 * beta,
                                        2.0 * eps / (2.0 * slack_r + eps));
}

const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::optimal:
      return "optimal";
    case SolverStatus::closed_form:
      return "closed_form";
    case SolverStatus::iteration_limit:
      return "iteration_limit";
    case SolverStatus::numerical_failure:
      return "numerical_failure";
  }
  return "unknown";
}

WitnessSolution solve_witness(const Vector& objective, const ConstraintSet& cs,
                              const SolverOptions& opts) {
  if (objective.size() != cs.dim()) throw DimensionMismatch("solve_witness: objective length mismatch");

  WhiteProblem wp;
  wp.a = cs.unwhiten.transpose() * objective;
  wp.rows = &cs.abs_rows_white;
  wp.weights = &cs.abs_weights;
  wp.rho = std::sqrt(std::max(0.0, cs.quad_bound));
  wp.b = cs.abs_bound;
  const WhiteSolution ws = solve_white(wp, opts);

  WitnessSolution sol;
  sol.status = ws.status;
  sol.newton_steps = ws.steps;
  sol.coefficients = cs.unwhiten * ws.z;

  // Pull back onto the feasible set if rounding in the change of
  // coordinates pushed a constraint past its bound.
  const double quad = cs.quad_value(sol.coefficients);
  const double absv = cs.abs_value(sol.coefficients);
  double scale = 1.0;
  if (quad > cs.quad_bound) scale = std::min(scale, std::sqrt(cs.quad_bound / quad));
  if (absv > cs.abs_bound) scale = std::min(scale, cs.abs_bound / absv);
  if (scale < 1.0) sol.coefficients *= scale * (1.0 - 1e-12);

  sol.quad_residual = cs.quad_value(sol.coefficients) - cs.quad_bound;
  sol.abs_residual = cs.abs_value(sol.coefficients) - cs.abs_bound;
  sol.value = objective.dot(sol.coefficients);
  if (sol.ok() && (sol.quad_residual > opts.feas_tol || sol.abs_residual > opts.feas_tol ||
                   !std::isfinite(sol.value))) {
    sol.status = SolverStatus::numerical_failure;
  }
  return sol;
}

double max_abs_at_point(std::span<const double> x, const ConstraintSet& cs,
                        const SolverOptions& opts) {
  const Vector m = cs.basis->features(x);
  const auto sol = solve_witness(m, cs, opts);
  if (!sol.ok()) {
    throw SolverFailure(std::string("max_abs_at_point: solver status ") + to_string(sol.status));
  }
  return std::max(0.0, sol.value);
}

bool exceeds_bound_at_point(std::span<const double> x, const ConstraintSet& cs, double bound,
                            const SolverOptions& opts) {
  const Vector m = cs.basis->features(x);
  const Vector a = cs.unwhiten.transpose() * m;
  const double rho = std::sqrt(std::max(0.0, cs.quad_bound));
  const double upper = rho * a.norm();
  if (upper <= bound) return false;
  if (cs.abs_bound > 0.0) {
    // The ball maximizer scaled into the l1 constraint is feasible.
    const Vector z0 = ball_point(a, rho);
    const double h0 = abs_mean(cs.abs_rows_white, cs.abs_weights, z0);
    const double lower = h0 > cs.abs_bound ? upper * (cs.abs_bound / h0) : upper;
    if (lower > bound) return true;
  }
  const auto sol = solve_witness(m, cs, opts);
  if (!sol.ok()) {
    throw SolverFailure(std::string("boundedness check: solver status ") + to_string(sol.status));
  }
  return sol.value > bound;
}

}  // namespace pqtds
