#pragma once

// PQ learner: L1 regression on half of the training data, then filtering
// of the test points against the other half with F = {f, 1 - f}.

#include "pqtds/classifier.hpp"
#include "pqtds/errors.hpp"
#include "pqtds/icf.hpp"
#include "pqtds/polycore.hpp"

#include <cstdint>

namespace pqtds {

struct PQConfig {
  double eps = 0.2;
  double delta = 0.1;
  double eta = 0.3;
  int degree = 1;
  double hyper_a = 1.0;
  bool multilinear = false;
  std::uint64_t seed = 0;
  SolverOptions solver;
  bool strict_tau = true;

  void validate() const;
};

/// Filtering parameters derived from the PQ parameters.
struct PQHyperparameters {
  double slack_r = 0.0;  // 1/eta + eps/96
  double beta = 0.0;     // 4 (2A)^(2l)
  double eps_icf = 0.0;  // eps * eta / 96
};

PQHyperparameters pq_hyperparameters(const PQConfig& cfg);

/// 4 (2A)^(2l), shared by the PQ and TDS pipelines.
double variance_bound(double hyper_a, int degree);

struct TrainingSplit {
  Sample regression;
  Sample reference;  // unlabeled
};

/// Deterministic 50/50 split (regression gets the extra point when odd).
TrainingSplit split_training(const Sample& train, std::uint64_t seed);

/// Independent seed for a named sub-stream (splitmix64 of seed and stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Fisher-Yates permutation of 0..n-1 driven by mt19937_64(seed).
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct PQOutput {
  Classifier classifier;
  Selector selector;
  RunRecord record;
  PQHyperparameters hyper;
  ICFConfig icf_config;
  double regression_objective = 0.0;
  double regression_error = 0.0;  // empirical 0/1 error of the classifier on its split
  std::size_t regression_size = 0;
  std::size_t reference_size = 0;
};

PQOutput pq_learn(const Sample& train, const Sample& test_points, const PQConfig& cfg);

/// Fraction of labeled points with h(x) != y and s(x) = 1. Works with any
/// selector-like callable returning 0/1.
template <class SelectorLike>
double selective_error(const Classifier& h, const SelectorLike& s, const Sample& labeled_test) {
  if (!labeled_test.labeled()) throw InvalidArgument("selective_error: sample must be labeled");
  if (labeled_test.empty()) return 0.0;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < labeled_test.size(); ++i) {
    const auto x = labeled_test.point(i);
    if (h(x) != labeled_test.label(i) && s(x) == 1) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(labeled_test.size());
}

/// Fraction of points with s(x) = 0.
template <class SelectorLike>
double rejection_rate(const SelectorLike& s, const Sample& points) {
  if (points.empty()) throw EmptySample("rejection_rate: empty sample");
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (s(points.point(i)) == 0) ++rejected;
  }
  return static_cast<double>(rejected) / static_cast<double>(points.size());
}

}  // namespace pqtds
