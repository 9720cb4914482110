#include "pqtds/oracle.hpp"

#include "detail/barrier_lp.hpp"
#include "pqtds/errors.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace pqtds::oracle {

namespace {

void check_enumerable(int d) {
  if (d < 1 || d > kMaxEnumerationDim) {
    throw InvalidArgument("hypercube enumeration needs 1 <= d <= " +
                          std::to_string(kMaxEnumerationDim) + ", got " + std::to_string(d));
  }
}

double pairwise_sum_range(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(v, half) + pairwise_sum_range(v + half, n - half);
}

}  // namespace

RowMatrix hypercube_points(int d) {
  check_enumerable(d);
  const std::size_t n = std::size_t{1} << d;
  RowMatrix pts(static_cast<Eigen::Index>(n), d);
  for (std::size_t r = 0; r < n; ++r) {
    for (int j = 0; j < d; ++j) {
      pts(static_cast<Eigen::Index>(r), j) = ((r >> j) & 1U) ? -1.0 : 1.0;
    }
  }
  return pts;
}

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_range(values.data(), values.size());
}

double exact_expectation_hypercube(int d, const PointFn& g) {
  const RowMatrix pts = hypercube_points(d);
  std::vector<double> vals(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    vals[static_cast<std::size_t>(r)] =
        g({pts.data() + r * d, static_cast<std::size_t>(d)});
  }
  return pairwise_sum(vals) / static_cast<double>(vals.size());
}

Vector exact_chow(const Classifier& f, const MonomialBasis& basis, int d) {
  check_enumerable(d);
  if (!basis.multilinear()) throw InvalidArgument("exact_chow: basis must be multilinear");
  if (basis.dimension() != d) throw DimensionMismatch("exact_chow: basis dimension differs from d");
  const RowMatrix pts = hypercube_points(d);
  const auto n = static_cast<std::size_t>(pts.rows());
  const std::size_t k = basis.size();
  // Column-wise pairwise sums keep each coefficient bit-stable.
  std::vector<std::vector<double>> cols(k, std::vector<double>(n, 0.0));
  std::vector<double> m(k);
  for (std::size_t r = 0; r < n; ++r) {
    std::span<const double> x{pts.data() + r * static_cast<std::size_t>(d),
                              static_cast<std::size_t>(d)};
    if (f(x) == 0) continue;
    basis.features(x, m);
    for (std::size_t j = 0; j < k; ++j) cols[j][r] = m[j];
  }
  Vector chow(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    chow[static_cast<Eigen::Index>(j)] = pairwise_sum(cols[j]) / static_cast<double>(n);
  }
  return chow;
}

void FiniteDistribution::validate() const {
  if (weights.empty()) throw InvalidArgument("FiniteDistribution: empty support");
  if (static_cast<std::size_t>(support.rows()) != weights.size()) {
    throw InvalidArgument("FiniteDistribution: support/weights size mismatch");
  }
  if (labels && labels->size() != weights.size()) {
    throw InvalidArgument("FiniteDistribution: labels size mismatch");
  }
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidArgument("FiniteDistribution: negative weight");
  }
  const double total = pairwise_sum(weights);
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("FiniteDistribution: weights sum to " + std::to_string(total));
  }
}

FiniteDistribution FiniteDistribution::uniform_hypercube(int d) {
  FiniteDistribution out;
  out.support = hypercube_points(d);
  out.weights.assign(static_cast<std::size_t>(out.support.rows()),
                     1.0 / static_cast<double>(out.support.rows()));
  return out;
}

FiniteDistribution FiniteDistribution::mixture(const FiniteDistribution& a,
                                               const FiniteDistribution& b, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("mixture weight must lie in [0,1]");
  if (a.support.cols() != b.support.cols()) throw DimensionMismatch("mixture: dimension mismatch");
  if (a.labels.has_value() != b.labels.has_value()) {
    throw InvalidArgument("mixture: both components must be labeled or both unlabeled");
  }
  FiniteDistribution out;
  out.support.resize(a.support.rows() + b.support.rows(), a.support.cols());
  out.support << a.support, b.support;
  out.weights.reserve(a.size() + b.size());
  for (double x : a.weights) out.weights.push_back((1.0 - w) * x);
  for (double x : b.weights) out.weights.push_back(w * x);
  if (a.labels) {
    std::vector<std::uint8_t> l(*a.labels);
    l.insert(l.end(), b.labels->begin(), b.labels->end());
    out.labels = std::move(l);
  }
  return out;
}

FiniteDistribution FiniteDistribution::labeled_by(
    const std::function<int(std::span<const double>)>& target, double noise) const {
  if (!(noise >= 0.0 && noise < 0.5)) throw InvalidArgument("labeled_by: noise must lie in [0, 1/2)");
  FiniteDistribution out;
  const std::size_t copies = noise > 0.0 ? 2 : 1;
  out.support.resize(static_cast<Eigen::Index>(size() * copies), support.cols());
  std::vector<std::uint8_t> lbl;
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    const int y = target(point(i));
    out.support.row(row++) = support.row(static_cast<Eigen::Index>(i));
    out.weights.push_back(weights[i] * (1.0 - noise));
    lbl.push_back(static_cast<std::uint8_t>(y));
    if (copies == 2) {
      out.support.row(row++) = support.row(static_cast<Eigen::Index>(i));
      out.weights.push_back(weights[i] * noise);
      lbl.push_back(static_cast<std::uint8_t>(1 - y));
    }
  }
  out.labels = std::move(lbl);
  return out;
}

double FiniteDistribution::expectation(const PointFn& g) const {
  std::vector<double> terms(size());
  for (std::size_t i = 0; i < size(); ++i) terms[i] = weights[i] * g(point(i));
  return pairwise_sum(terms);
}

double exact_error(const std::function<int(std::span<const double>)>& f,
                   const FiniteDistribution& d) {
  if (!d.labels) throw InvalidArgument("exact_error: distribution is unlabeled");
  std::vector<double> terms(d.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (f(d.point(i)) != (*d.labels)[i]) terms[i] = d.weights[i];
  }
  return pairwise_sum(terms);
}

LambdaResult exact_lambda(const ConceptClass& concepts, const FiniteDistribution& train,
                          const FiniteDistribution& test) {
  if (concepts.size() == 0) throw InvalidArgument("exact_lambda: empty concept class");
  if (!train.labels || !test.labels) throw InvalidArgument("exact_lambda: distributions must be labeled");
  train.validate();
  test.validate();

  LambdaResult best;
  best.lambda = std::numeric_limits<double>::infinity();
  best.opt_train = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < concepts.size(); ++c) {
    auto f = [&](std::span<const double> x) { return concepts.label(c, x); };
    const double e_train = exact_error(f, train);
    const double e_test = exact_error(f, test);
    const double joint = e_train + e_test;
    best.opt_train = std::min(best.opt_train, e_train);
    // Joint errors within 1e-12 count as tied; summation order can split exact ties.
    const bool better = joint < best.lambda - 1e-12;
    const bool tied = !better && std::abs(joint - best.lambda) <= 1e-12;
    if (better || (tied && e_train < best.lambda_train)) {
      best.lambda = joint;
      best.lambda_train = e_train;
      best.lambda_test = e_test;
      best.argmin = c;
    }
  }
  best.lambda_test = best.lambda - best.lambda_train;
  return best;
}

Sandwich l1_sandwich(const std::function<int(std::span<const double>)>& f, BasisPtr basis,
                     const FiniteDistribution& d) {
  d.validate();
  const auto n = static_cast<Eigen::Index>(d.size());
  const auto k = static_cast<Eigen::Index>(basis->size());
  Matrix feats(n, k);
  Vector fx(n);
  Vector mean = Vector::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto x = d.point(static_cast<std::size_t>(i));
    feats.row(i) = basis->features(x).transpose();
    fx[i] = f(x);
    mean += d.weights[static_cast<std::size_t>(i)] * feats.row(i).transpose();
  }

  // upper: min E[p] s.t. -p(x) <= -f(x); start at p == 2.
  Vector start = Vector::Zero(k);
  start[0] = 2.0;
  auto up = detail::solve_inequality_lp(-feats, -fx, mean, start, 1e-10);
  // lower: max E[p] s.t. p(x) <= f(x); start at p == -1.
  start[0] = -1.0;
  auto down = detail::solve_inequality_lp(feats, fx, -mean, start, 1e-10);
  if (!up.converged || !down.converged) throw SolverFailure("l1_sandwich: LP did not converge");

  Sandwich s{Polynomial(basis, down.x), Polynomial(basis, up.x), 0.0};
  s.gap = mean.dot(up.x) - mean.dot(down.x);
  return s;
}

std::optional<int> l1_sandwiching_degree(const std::function<int(std::span<const double>)>& f,
                                         const FiniteDistribution& d, double eps, int max_degree,
                                         bool multilinear) {
  const int dim = static_cast<int>(d.support.cols());
  for (int l = 0; l <= max_degree; ++l) {
    if (multilinear && l > dim) break;
    auto s = l1_sandwich(f, make_basis(dim, l, multilinear), d);
    if (s.gap <= eps + 1e-7) return l;
  }
  return std::nullopt;
}

}  // namespace pqtds::oracle
