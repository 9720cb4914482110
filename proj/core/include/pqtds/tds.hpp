#pragma once

// Tolerant TDS learner: the PQ pipeline with a different filtering accuracy,
// followed by an accept/reject decision from the selector's rejection rate on
// a held-out slice of the test points.

#include "pqtds/classifier.hpp"
#include "pqtds/icf.hpp"
#include "pqtds/polycore.hpp"

#include <cstdint>
#include <optional>

namespace pqtds {

enum class Decision { accept, reject };

const char* to_string(Decision d);

struct TDSConfig {
  double eps = 0.2;
  double delta = 0.1;
  double theta = 0.0;  // tolerated TV distance, in [0, 1)
  /// Slack R > 1; default_R(theta, eps) when unset.
  std::optional<double> slack_r;
  int degree = 1;
  double hyper_a = 1.0;
  bool multilinear = false;
  std::uint64_t seed = 0;
  SolverOptions solver;
  bool strict_tau = true;

  void validate() const;
  double resolved_r() const;
};

/// 1 + max{sqrt(theta/2), eps/9}.
double default_R(double theta, double eps);

/// R theta / (R - 1) + eps / 4.
double accept_threshold(double slack_r, double theta, double eps);

/// (R - 1) eps / (128 R^2).
double tds_filter_eps(double slack_r, double eps);

/// max(ceil(log(1/delta) / eps^2), 100).
std::size_t holdout_size(double eps, double delta);

struct TDSVerdict {
  Decision decision = Decision::reject;
  std::optional<Classifier> classifier;  // present iff accept
  double holdout_rejection = 0.0;
  double threshold = 0.0;
  double slack_r = 0.0;
  double eps_icf = 0.0;
  double beta = 0.0;
  std::size_t holdout_size = 0;
  Selector selector;
  RunRecord record;
  ICFConfig icf_config;
  double regression_objective = 0.0;
  double regression_error = 0.0;
  /// Regression classifier regardless of the decision (for diagnostics).
  Classifier fitted;
};

/// Splits the test points into a holdout (first, by a seed-derived
/// permutation) and the filtering target. Throws InvalidArgument when the
/// test points cannot fill the holdout and leave at least one target point.
TDSVerdict tds_learn(const Sample& train, const Sample& test_points, const TDSConfig& cfg);

}  // namespace pqtds
