#include "pqtds/l1reg.hpp"

#include "detail/rows.hpp"
#include "pqtds/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pqtds {

namespace {

struct LadProblem {
  RowMatrix w;    // whitened distinct (row, label) groups
  Vector y;       // group labels
  Vector weight;  // multiplicity / n
};

double lad_objective(const LadProblem& p, const Vector& z) {
  return p.weight.dot((p.w * z - p.y).cwiseAbs());
}

// min sum_g weight_g t_g  s.t.  -t_g <= w_g.z - y_g <= t_g.
Vector lad_barrier(const LadProblem& p, double gap_tol, int max_steps, int& steps_out) {
  const Eigen::Index r = p.w.cols();
  const Eigen::Index n = p.w.rows();
  Vector z = Vector::Zero(r);
  Vector t = p.y.cwiseAbs().array() + 1.0;
  const double m = 2.0 * static_cast<double>(n);

  auto phi = [&](const Vector& zz, const Vector& tt, double tau) {
    const Vector res = p.w * zz - p.y;
    const Vector g1 = tt - res;
    const Vector g2 = tt + res;
    if ((g1.array() <= 0.0).any() || (g2.array() <= 0.0).any()) {
      return std::numeric_limits<double>::infinity();
    }
    return tau * p.weight.dot(tt) - g1.array().log().sum() - g2.array().log().sum();
  };

  double tau = 1.0;
  int steps = 0;
  for (;;) {
    for (;;) {
      if (steps >= max_steps) throw SolverFailure("fit_l1: barrier method hit its step budget");
      ++steps;
      const Vector res = p.w * z - p.y;
      const Vector g1 = t - res;
      const Vector g2 = t + res;
      const Vector i1 = g1.cwiseInverse();
      const Vector i2 = g2.cwiseInverse();
      const Vector d = i1.cwiseAbs2() + i2.cwiseAbs2();
      const Vector e = i2.cwiseAbs2() - i1.cwiseAbs2();
      const Vector gz = p.w.transpose() * (i1 - i2);
      const Vector gt = tau * p.weight - i1 - i2;
      const Vector sdiag = 4.0 * (g1.cwiseAbs2() + g2.cwiseAbs2()).cwiseInverse();
      Matrix schur = p.w.transpose() * sdiag.asDiagonal() * p.w;
      const Vector rhs = -gz + p.w.transpose() * e.cwiseProduct(gt.cwiseQuotient(d));
      Eigen::LLT<Matrix> llt(schur);
      const Vector dz = llt.info() == Eigen::Success ? Vector(llt.solve(rhs))
                                                     : Vector(schur.ldlt().solve(rhs));
      const Vector dt = (-gt - e.cwiseProduct(p.w * dz)).cwiseQuotient(d);
      const double dec = -(gz.dot(dz) + gt.dot(dt));
      if (!std::isfinite(dec)) throw SolverFailure("fit_l1: non-finite Newton decrement");
      if (dec * 0.5 <= 1e-10) break;

      const Vector ds = p.w * dz;
      const Vector dg1 = dt - ds;
      const Vector dg2 = dt + ds;
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (dg1[i] < 0.0) alpha = std::min(alpha, -0.99 * g1[i] / dg1[i]);
        if (dg2[i] < 0.0) alpha = std::min(alpha, -0.99 * g2[i] / dg2[i]);
      }
      const double f0 = phi(z, t, tau);
      if (0.5 * dec <= 1e-14 * std::abs(f0)) break;
      bool moved = false;
      while (alpha > 1e-14) {
        const Vector zn = z + alpha * dz;
        const Vector tn = t + alpha * dt;
        if (phi(zn, tn, tau) <= f0 - 0.01 * alpha * dec) {
          z = zn;
          t = tn;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    if (m / tau <= gap_tol) break;
    tau *= 20.0;
  }
  steps_out = steps;
  return z;
}

// Interpolates the r independent groups with the smallest residuals.
std::optional<Vector> crossover_vertex(const LadProblem& p, const Vector& z) {
  const Eigen::Index r = p.w.cols();
  const Vector res = (p.w * z - p.y).cwiseAbs();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p.w.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return res[a] < res[b]; });

  Matrix q(r, r);  // orthonormalized chosen rows
  Matrix chosen(r, r);
  Vector rhs(r);
  Eigen::Index k = 0;
  for (Eigen::Index idx : order) {
    if (k == r) break;
    Vector v = p.w.row(idx).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (Eigen::Index j = 0; j < k; ++j) v -= q.col(j).dot(v) * q.col(j);
    if (v.norm() <= 1e-9 * norm0) continue;
    q.col(k) = v.normalized();
    chosen.row(k) = p.w.row(idx);
    rhs[k] = p.y[idx];
    ++k;
  }
  if (k < r) return std::nullopt;
  Eigen::FullPivLU<Matrix> lu(chosen);
  if (!lu.isInvertible()) return std::nullopt;
  return Vector(lu.solve(rhs));
}

}  // namespace

L1Fit fit_l1(BasisPtr basis, const Sample& s, double opt_tol) {
  if (s.empty()) throw EmptySample("fit_l1: empty sample");
  if (!s.labeled()) throw InvalidArgument("fit_l1: sample must be labeled");
  s.validate();
  const auto n = static_cast<Eigen::Index>(s.size());
  const auto k = static_cast<Eigen::Index>(basis->size());
  const RowMatrix feats = feature_matrix(*basis, s);

  // Group identical (features, label) pairs; label goes in the last column.
  RowMatrix keyed(n, k + 1);
  keyed.leftCols(k) = feats;
  for (Eigen::Index i = 0; i < n; ++i) keyed(i, k) = s.label(static_cast<std::size_t>(i));
  const auto groups = detail::distinct_rows(keyed);
  const auto g = static_cast<Eigen::Index>(groups.rows.size());

  RowMatrix grouped(g, k);
  LadProblem prob;
  prob.y.resize(g);
  prob.weight.resize(g);
  RowMatrix scaled(g, k);
  for (Eigen::Index i = 0; i < g; ++i) {
    const auto src = static_cast<Eigen::Index>(groups.rows[static_cast<std::size_t>(i)]);
    grouped.row(i) = feats.row(src);
    prob.y[i] = s.label(static_cast<std::size_t>(src));
    prob.weight[i] = static_cast<double>(groups.counts[static_cast<std::size_t>(i)]) /
                     static_cast<double>(n);
    scaled.row(i) = std::sqrt(prob.weight[i]) * feats.row(src);
  }

  // Restrict to the row space of the sample; whitened coordinates.
  Eigen::BDCSVD<Matrix> svd(Matrix(scaled), Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > 1e-10 * sv[0]) ++rank;
  const Matrix unwhiten = svd.matrixV().leftCols(rank) * sv.head(rank).cwiseInverse().asDiagonal();
  prob.w = grouped * unwhiten;

  L1Fit fit;
  Vector z = lad_barrier(prob, 0.25 * opt_tol, 2000, fit.newton_steps);
  if (auto v = crossover_vertex(prob, z)) {
    if (lad_objective(prob, *v) <= lad_objective(prob, z) + 1e-12) {
      z = *v;
      fit.vertex = true;
    }
  }
  fit.polynomial = Polynomial(basis, unwhiten * z);

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pred = fit.polynomial.from_features(
        {feats.data() + i * k, static_cast<std::size_t>(k)});
    total += std::abs(pred - s.label(static_cast<std::size_t>(i)));
  }
  fit.objective = total / static_cast<double>(n);
  return fit;
}

ThresholdChoice best_threshold(std::span<const double> values, std::span<const std::uint8_t> labels) {
  if (values.size() != labels.size()) throw DimensionMismatch("best_threshold: size mismatch");
  const std::size_t n = values.size();
  if (n == 0) return {};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = values[order[i]];

  std::vector<double> candidates{0.5, sorted.front() - 1.0, sorted.back() + 1.0};
  for (std::size_t i = 1; i < n; ++i) {
    if (sorted[i] > sorted[i - 1]) candidates.push_back(0.5 * (sorted[i - 1] + sorted[i]));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // prefix_pos[i] = positives among the i smallest values.
  std::vector<std::size_t> prefix_pos(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) prefix_pos[i + 1] = prefix_pos[i] + labels[order[i]];
  const std::size_t total_pos = prefix_pos[n];

  ThresholdChoice best;
  std::size_t best_errors = std::numeric_limits<std::size_t>::max();
  for (double theta : candidates) {
    // Points with value < theta are predicted 0.
    const auto below = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), theta) - sorted.begin());
    const std::size_t false_neg = prefix_pos[below];
    const std::size_t false_pos = (n - below) - (total_pos - prefix_pos[below]);
    const std::size_t errors = false_neg + false_pos;
    const bool better = errors < best_errors;
    const bool prefer_half = errors == best_errors && theta == 0.5;
    if (better || prefer_half) {
      best_errors = errors;
      best.theta = theta;
    }
  }
  best.empirical_error = static_cast<double>(best_errors) / static_cast<double>(n);
  return best;
}

Classifier threshold_round(const Polynomial& p, const Sample& s) {
  if (!s.labeled()) throw InvalidArgument("threshold_round: sample must be labeled");
  if (!s.empty() && s.dim() != p.basis->dimension()) {
    throw DimensionMismatch("threshold_round: sample dimension does not match polynomial");
  }
  std::vector<double> values(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) values[i] = p(s.point(i));
  const auto choice = best_threshold(values, *s.labels);
  return Classifier::threshold(p, choice.theta);
}

double empirical_error(const Classifier& h, const Sample& s) {
  if (!s.labeled()) throw InvalidArgument("empirical_error: sample must be labeled");
  if (s.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (h(s.point(i)) != s.label(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(s.size());
}

}  // namespace pqtds
