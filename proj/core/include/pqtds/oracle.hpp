#pragma once

// Brute-force ground truth on small instances: exact expectations over the
// hypercube, exact Chow parameters, the joint optimal error over finite
// concept classes, and L1 sandwiching polynomials by linear programming.

#include "pqtds/classifier.hpp"
#include "pqtds/polycore.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pqtds::oracle {

inline constexpr int kMaxEnumerationDim = 20;

using PointFn = std::function<double(std::span<const double>)>;

/// All 2^d points of {-1,+1}^d. Row r has x_j = -1 iff bit j of r is set.
RowMatrix hypercube_points(int d);

/// Sum in a fixed pairwise tree over index order; bit-stable.
double pairwise_sum(std::span<const double> values);

/// 2^-d * sum over {-1,+1}^d of g.
double exact_expectation_hypercube(int d, const PointFn& g);

/// E_{x~U({-1,+1}^d)}[f(x) m_k(x)] for every monomial of a multilinear basis.
Vector exact_chow(const Classifier& f, const MonomialBasis& basis, int d);

/// Distribution with finite support; optional per-atom labels (a noisy label
/// is represented by two atoms at the same point).
struct FiniteDistribution {
  RowMatrix support;
  std::vector<double> weights;
  std::optional<std::vector<std::uint8_t>> labels;

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t i) const {
    return {support.data() + i * static_cast<std::size_t>(support.cols()),
            static_cast<std::size_t>(support.cols())};
  }
  /// Throws InvalidArgument unless weights are nonnegative and sum to 1 within 1e-12.
  void validate() const;

  static FiniteDistribution uniform_hypercube(int d);
  /// Mixture (1-w) a + w b on the concatenated support.
  static FiniteDistribution mixture(const FiniteDistribution& a, const FiniteDistribution& b,
                                    double w);
  /// Labels every atom with target; flipping with probability noise splits each atom in two.
  FiniteDistribution labeled_by(const std::function<int(std::span<const double>)>& target,
                                double noise = 0.0) const;
  double expectation(const PointFn& g) const;
};

/// Finite, indexable family of {0,1}-valued concepts.
class ConceptClass {
 public:
  virtual ~ConceptClass() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t concept_index, std::span<const double> x) const = 0;
  virtual std::string describe(std::size_t concept_index) const = 0;
};

struct LambdaResult {
  double lambda = 0.0;
  double lambda_train = 0.0;
  double lambda_test = 0.0;
  std::size_t argmin = 0;
  /// Minimal training error over the class.
  double opt_train = 0.0;
};

/// Joint optimal error min_f err_train(f) + err_test(f). Among joint
/// minimizers the smallest training error wins, then the first concept in
/// enumeration order.
LambdaResult exact_lambda(const ConceptClass& concepts, const FiniteDistribution& train,
                          const FiniteDistribution& test);

/// err_D(f) = sum of weights of atoms with f(x) != label.
double exact_error(const std::function<int(std::span<const double>)>& f,
                   const FiniteDistribution& d);

struct Sandwich {
  Polynomial lower;
  Polynomial upper;
  double gap = 0.0;  // E_D[upper - lower]
};

/// Degree-l L1 sandwiching polynomials for f under a finite distribution:
/// lower <= f <= upper on the support, E[upper - lower] minimized by LP.
Sandwich l1_sandwich(const std::function<int(std::span<const double>)>& f, BasisPtr basis,
                     const FiniteDistribution& d);

/// Smallest degree <= max_degree whose sandwich gap is <= eps (+1e-7), if any.
std::optional<int> l1_sandwiching_degree(const std::function<int(std::span<const double>)>& f,
                                         const FiniteDistribution& d, double eps, int max_degree,
                                         bool multilinear);

}  // namespace pqtds::oracle
