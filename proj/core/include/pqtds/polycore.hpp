#pragma once

// Monomial bases, polynomials over them, labeled samples and the empirical
// moments the filtering algorithm is built on.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pqtds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::size_t kDefaultBasisCap = 200000;

/// Number of monomials of total degree <= degree in dim variables, saturating
/// at SIZE_MAX.
std::size_t basis_size(int dim, int degree, bool multilinear);

/// Canonical (graded, then lexicographic with x1 > x2 > ...) list of
/// multi-indices spanning the d-variate polynomials of degree <= l.
class MonomialBasis {
 public:
  static MonomialBasis enumerate(int dim, int degree, bool multilinear,
                                 std::size_t cap = kDefaultBasisCap);

  int dimension() const { return dim_; }
  int degree() const { return degree_; }
  bool multilinear() const { return multilinear_; }
  std::size_t size() const { return parent_.size(); }

  /// Exponent vector of the k-th monomial (length dimension()).
  std::span<const std::uint8_t> exponents(std::size_t k) const;
  int total_degree(std::size_t k) const;

  /// Feature vector m(x); out.size() must equal size().
  void features(std::span<const double> x, std::span<double> out) const;
  Vector features(std::span<const double> x) const;

  /// Human-readable monomial, e.g. "x1*x3^2" or "1".
  std::string monomial_name(std::size_t k) const;
  /// "d=<d> degree=<l> multilinear=<0|1>".
  std::string descriptor() const;

  friend bool operator==(const MonomialBasis& a, const MonomialBasis& b) {
    return a.dim_ == b.dim_ && a.degree_ == b.degree_ && a.multilinear_ == b.multilinear_;
  }

 private:
  MonomialBasis() = default;

  int dim_ = 0;
  int degree_ = 0;
  bool multilinear_ = false;
  std::vector<std::uint8_t> exps_;  // size() * dim_, row per monomial
  // Each monomial of positive degree is parent * x_var.
  std::vector<std::size_t> parent_;
  std::vector<int> var_;
};

using BasisPtr = std::shared_ptr<const MonomialBasis>;

BasisPtr make_basis(int dim, int degree, bool multilinear, std::size_t cap = kDefaultBasisCap);

/// Plain left-to-right dot product. Every place that must agree bit-for-bit
/// (run versus selector evaluation) goes through this.
double dot(std::span<const double> a, std::span<const double> b);

/// Coefficient vector over a monomial basis.
struct Polynomial {
  BasisPtr basis;
  Vector coefficients;

  Polynomial() = default;
  Polynomial(BasisPtr b, Vector c);

  static Polynomial zero(BasisPtr b);
  static Polynomial constant(BasisPtr b, double value);
  /// Single monomial with the given exponent vector and coefficient.
  static Polynomial monomial(BasisPtr b, std::span<const std::uint8_t> exponents,
                             double coefficient = 1.0);

  double operator()(std::span<const double> x) const;
  /// Evaluation from a precomputed feature row m(x).
  double from_features(std::span<const double> features) const;

  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator*(double s) const;
};

enum class Provenance { unspecified, train, test };

const char* to_string(Provenance p);

/// Multiset of points in R^d, optionally labeled in {0,1}.
struct Sample {
  RowMatrix points;  // n x d
  std::optional<std::vector<std::uint8_t>> labels;
  Provenance provenance = Provenance::unspecified;
  std::uint64_t seed = 0;

  Sample() = default;
  explicit Sample(RowMatrix pts, Provenance prov = Provenance::unspecified,
                  std::uint64_t seed = 0);
  Sample(RowMatrix pts, std::vector<std::uint8_t> lbls,
         Provenance prov = Provenance::unspecified, std::uint64_t seed = 0);

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
  bool empty() const { return points.rows() == 0; }
  bool labeled() const { return labels.has_value(); }

  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * static_cast<std::size_t>(points.cols()),
            static_cast<std::size_t>(points.cols())};
  }
  int label(std::size_t i) const { return (*labels)[i]; }

  /// Rows selected by index, labels carried along.
  Sample subset(std::span<const std::size_t> idx) const;
  /// Same points without labels.
  Sample unlabeled() const;

  /// Throws InvalidArgument when label count or values are inconsistent.
  void validate() const;
};

/// n x |basis| matrix of feature rows, each computed by MonomialBasis::features.
RowMatrix feature_matrix(const MonomialBasis& basis, const Sample& s);

/// (1/|S|) sum m(x) m(x)^T.
Matrix empirical_gram(const MonomialBasis& basis, const Sample& s);

class Classifier;

/// (1/|S|) sum f(x) |p(x)|.
double empirical_weighted_abs_mean(const Classifier& f, const Polynomial& p, const Sample& s);

}  // namespace pqtds
