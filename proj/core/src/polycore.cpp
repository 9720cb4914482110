#include "pqtds/polycore.hpp"

#include "pqtds/classifier.hpp"
#include "pqtds/errors.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace pqtds {

namespace {

// C(n, k) with saturation.
std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    // r * (n - k + i) / i stays integral at each step.
    const std::size_t num = n - k + i;
    if (r > kMax / num) return kMax;
    r = r * num / i;
  }
  return r;
}

std::size_t saturating_add(std::size_t a, std::size_t b) {
  constexpr auto kMax = std::numeric_limits<std::size_t>::max();
  return a > kMax - b ? kMax : a + b;
}

}  // namespace

std::size_t basis_size(int dim, int degree, bool multilinear) {
  if (dim < 1 || degree < 0) throw InvalidArgument("basis_size: need dim >= 1 and degree >= 0");
  const auto d = static_cast<std::size_t>(dim);
  const auto l = static_cast<std::size_t>(degree);
  if (!multilinear) return binomial(d + l, l);
  std::size_t total = 0;
  for (std::size_t k = 0; k <= std::min(l, d); ++k) total = saturating_add(total, binomial(d, k));
  return total;
}

MonomialBasis MonomialBasis::enumerate(int dim, int degree, bool multilinear, std::size_t cap) {
  if (dim < 1) throw InvalidArgument("enumerate_basis: dimension must be >= 1");
  if (degree < 0) throw InvalidArgument("enumerate_basis: degree must be >= 0");
  if (degree > 255) throw InvalidArgument("enumerate_basis: degree must be <= 255");
  const std::size_t n = basis_size(dim, degree, multilinear);
  if (n > cap) {
    std::ostringstream msg;
    msg << "enumerate_basis: " << n << " monomials exceeds cap " << cap << " (d=" << dim
        << ", degree=" << degree << ")";
    throw BasisTooLarge(msg.str());
  }

  MonomialBasis b;
  b.dim_ = dim;
  b.degree_ = degree;
  b.multilinear_ = multilinear;
  b.exps_.reserve(n * static_cast<std::size_t>(dim));

  std::vector<std::uint8_t> alpha(static_cast<std::size_t>(dim), 0);
  const int max_per_coord = multilinear ? 1 : degree;

  // Exponents of total degree k in lexicographic order, largest first
  // coordinate first: x1^2, x1*x2, x2^2, ...
  std::function<void(int, int)> fill = [&](int coord, int remaining) {
    if (coord == dim - 1) {
      if (remaining > max_per_coord) return;
      alpha[static_cast<std::size_t>(coord)] = static_cast<std::uint8_t>(remaining);
      b.exps_.insert(b.exps_.end(), alpha.begin(), alpha.end());
      return;
    }
    for (int e = std::min(remaining, max_per_coord); e >= 0; --e) {
      alpha[static_cast<std::size_t>(coord)] = static_cast<std::uint8_t>(e);
      fill(coord + 1, remaining - e);
    }
    alpha[static_cast<std::size_t>(coord)] = 0;
  };
  for (int k = 0; k <= degree; ++k) fill(0, k);

  const std::size_t count = b.exps_.size() / static_cast<std::size_t>(dim);
  b.parent_.assign(count, 0);
  b.var_.assign(count, -1);
  std::map<std::vector<std::uint8_t>, std::size_t> index;
  for (std::size_t k = 0; k < count; ++k) {
    auto e = b.exponents(k);
    std::vector<std::uint8_t> key(e.begin(), e.end());
    index.emplace(key, k);
    auto first = std::find_if(key.begin(), key.end(), [](std::uint8_t v) { return v > 0; });
    if (first == key.end()) continue;
    --*first;
    b.var_[k] = static_cast<int>(first - key.begin());
    b.parent_[k] = index.at(key);
  }
  return b;
}

std::span<const std::uint8_t> MonomialBasis::exponents(std::size_t k) const {
  const auto d = static_cast<std::size_t>(dim_);
  return {exps_.data() + k * d, d};
}

int MonomialBasis::total_degree(std::size_t k) const {
  int s = 0;
  for (auto e : exponents(k)) s += e;
  return s;
}

void MonomialBasis::features(std::span<const double> x, std::span<double> out) const {
  if (x.size() != static_cast<std::size_t>(dim_)) {
    throw DimensionMismatch("features: point has dimension " + std::to_string(x.size()) +
                            ", basis expects " + std::to_string(dim_));
  }
  if (out.size() != size()) throw DimensionMismatch("features: output size mismatch");
  out[0] = 1.0;
  for (std::size_t k = 1; k < out.size(); ++k) {
    out[k] = out[parent_[k]] * x[static_cast<std::size_t>(var_[k])];
  }
}

Vector MonomialBasis::features(std::span<const double> x) const {
  Vector m(static_cast<Eigen::Index>(size()));
  features(x, {m.data(), size()});
  return m;
}

std::string MonomialBasis::monomial_name(std::size_t k) const {
  std::string s;
  auto e = exponents(k);
  for (std::size_t j = 0; j < e.size(); ++j) {
    if (e[j] == 0) continue;
    if (!s.empty()) s += '*';
    s += 'x' + std::to_string(j + 1);
    if (e[j] > 1) s += '^' + std::to_string(e[j]);
  }
  return s.empty() ? "1" : s;
}

std::string MonomialBasis::descriptor() const {
  return "d=" + std::to_string(dim_) + " degree=" + std::to_string(degree_) +
         " multilinear=" + (multilinear_ ? "1" : "0");
}

BasisPtr make_basis(int dim, int degree, bool multilinear, std::size_t cap) {
  return std::make_shared<const MonomialBasis>(
      MonomialBasis::enumerate(dim, degree, multilinear, cap));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Polynomial::Polynomial(BasisPtr b, Vector c) : basis(std::move(b)), coefficients(std::move(c)) {
  if (!basis) throw InvalidArgument("Polynomial: null basis");
  if (static_cast<std::size_t>(coefficients.size()) != basis->size()) {
    throw DimensionMismatch("Polynomial: coefficient count does not match basis size");
  }
}

Polynomial Polynomial::zero(BasisPtr b) {
  const auto n = static_cast<Eigen::Index>(b->size());
  return {std::move(b), Vector::Zero(n)};
}

Polynomial Polynomial::constant(BasisPtr b, double value) {
  auto p = zero(std::move(b));
  p.coefficients[0] = value;
  return p;
}

Polynomial Polynomial::monomial(BasisPtr b, std::span<const std::uint8_t> exponents,
                                double coefficient) {
  auto p = zero(b);
  for (std::size_t k = 0; k < b->size(); ++k) {
    auto e = b->exponents(k);
    if (std::equal(e.begin(), e.end(), exponents.begin(), exponents.end())) {
      p.coefficients[static_cast<Eigen::Index>(k)] = coefficient;
      return p;
    }
  }
  throw InvalidArgument("Polynomial::monomial: exponent vector not in basis");
}

double Polynomial::operator()(std::span<const double> x) const {
  const Vector m = basis->features(x);
  return from_features({m.data(), static_cast<std::size_t>(m.size())});
}

double Polynomial::from_features(std::span<const double> features) const {
  if (features.size() != static_cast<std::size_t>(coefficients.size())) {
    throw DimensionMismatch("Polynomial: feature row length mismatch");
  }
  return dot(features, {coefficients.data(), static_cast<std::size_t>(coefficients.size())});
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  if (!(*basis == *other.basis)) throw InvalidArgument("Polynomial: adding over different bases");
  return {basis, coefficients + other.coefficients};
}

Polynomial Polynomial::operator*(double s) const { return {basis, coefficients * s}; }

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::train:
      return "train";
    case Provenance::test:
      return "test";
    case Provenance::unspecified:
      break;
  }
  return "unspecified";
}

Sample::Sample(RowMatrix pts, Provenance prov, std::uint64_t sd)
    : points(std::move(pts)), provenance(prov), seed(sd) {}

Sample::Sample(RowMatrix pts, std::vector<std::uint8_t> lbls, Provenance prov, std::uint64_t sd)
    : points(std::move(pts)), labels(std::move(lbls)), provenance(prov), seed(sd) {
  validate();
}

Sample Sample::subset(std::span<const std::size_t> idx) const {
  Sample out;
  out.provenance = provenance;
  out.seed = seed;
  out.points.resize(static_cast<Eigen::Index>(idx.size()), points.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.points.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(idx[r]));
  }
  if (labels) {
    std::vector<std::uint8_t> l(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) l[r] = (*labels)[idx[r]];
    out.labels = std::move(l);
  }
  return out;
}

Sample Sample::unlabeled() const { return Sample(points, provenance, seed); }

void Sample::validate() const {
  if (!labels) return;
  if (labels->size() != size()) {
    throw InvalidArgument("Sample: " + std::to_string(labels->size()) + " labels for " +
                          std::to_string(size()) + " points");
  }
  for (auto v : *labels) {
    if (v > 1) throw InvalidArgument("Sample: label values must be 0 or 1");
  }
}

RowMatrix feature_matrix(const MonomialBasis& basis, const Sample& s) {
  if (s.dim() != basis.dimension() && !s.empty()) {
    throw DimensionMismatch("feature_matrix: sample dimension does not match basis");
  }
  RowMatrix f(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    basis.features(s.point(i), {f.data() + i * basis.size(), basis.size()});
  }
  return f;
}

Matrix empirical_gram(const MonomialBasis& basis, const Sample& s) {
  if (s.empty()) throw EmptySample("empirical_gram: empty sample");
  const RowMatrix f = feature_matrix(basis, s);
  Matrix g = f.transpose() * f;
  g /= static_cast<double>(s.size());
  return 0.5 * (g + g.transpose());
}

double empirical_weighted_abs_mean(const Classifier& f, const Polynomial& p, const Sample& s) {
  if (s.empty()) throw EmptySample("empirical_weighted_abs_mean: empty sample");
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto x = s.point(i);
    if (f(x) == 1) total += std::abs(p(x));
  }
  return total / static_cast<double>(s.size());
}

}  // namespace pqtds
