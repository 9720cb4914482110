#pragma once

// Iterative Chow Filtering over a finite family of classifiers.
//
// Given a reference sample S (training marginal) and a target sample S'
// (test marginal), repeatedly finds a classifier f and a low-degree p whose
// Chow-type expectation over the surviving target points is large while p
// stays small under S, and removes the target points where f|p| exceeds the
// smallest threshold that removes R times more target mass than reference
// mass. The output selector is the conjunction of a boundedness test and all
// thresholds found.

#include "pqtds/classifier.hpp"
#include "pqtds/cvxsub.hpp"
#include "pqtds/polycore.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace pqtds {

struct ICFConfig {
  int degree = 1;
  double slack_r = 2.0;  // R > 1
  double beta = 1.0;     // variance bound, > 0
  double eps = 0.1;      // additive error in (0, 1)
  double hyper_a = 1.0;  // hypercontractivity constant, informational
  bool multilinear = false;
  SolverOptions solver;
  bool strict_tau = true;
  /// Defaults to floor(1/Delta) + 1 when unset.
  std::optional<std::uint64_t> max_iterations;

  /// Throws InvalidArgument when a parameter is out of range.
  void validate() const;
};

struct Schedule {
  double bound = 0.0;  // B
  double delta = 0.0;  // minimum removed fraction per filtering step
};

/// B = 2 sqrt(2 R (d+1)^l beta / eps),  Delta = eps^2 / (B (2R + eps)).
Schedule compute_schedule(const ICFConfig& cfg, int dim);

struct FilterRule {
  std::size_t classifier_index = 0;
  Polynomial witness;
  double tau = 0.0;
};

/// f(x) |p(x)| evaluated from a feature row; shared by the run and the selector.
double rule_statistic(int f_value, const Polynomial& p, std::span<const double> features);

/// Smallest tau in {0} U values(current) U values(reference), tau <= bound,
/// with count_cur(> tau)/n_target >= R count_ref(> tau)/|reference| + delta.
/// Throws NoValidThreshold when none qualifies.
double find_tau(std::span<const double> current_values, std::span<const double> reference_values,
                double slack_r, double delta, std::size_t n_target, double bound);

/// Succinct selector: boundedness test against each classifier's constraint
/// set, then every filter rule. Evaluation memoizes the boundedness test per
/// (point, classifier).
class Selector {
 public:
  Selector(double bound, std::vector<Classifier> family, std::vector<ConstraintSet> constraints,
           std::vector<FilterRule> rules, SolverOptions solver);

  int operator()(std::span<const double> x) const;
  /// Whether x passes the boundedness factor alone.
  bool bounded(std::span<const double> x) const;

  double bound() const { return bound_; }
  const std::vector<Classifier>& family() const { return family_; }
  const std::vector<ConstraintSet>& constraints() const { return constraints_; }
  const std::vector<FilterRule>& rules() const { return rules_; }
  const SolverOptions& solver() const { return solver_; }
  std::size_t dim() const;

 private:
  struct Cache {
    std::mutex mu;
    std::unordered_map<std::string, bool> exceeds;  // key: point bytes + classifier index
  };

  bool exceeds_cached(std::span<const double> x, std::size_t k) const;

  friend struct SelectorBuilder;

  double bound_;
  std::vector<Classifier> family_;
  std::vector<ConstraintSet> constraints_;
  std::vector<FilterRule> rules_;
  SolverOptions solver_;
  std::shared_ptr<Cache> cache_;
};

enum class Termination { converged, empty_after_bounding, terminated_inconsistent, iteration_cap };

const char* to_string(Termination t);

struct IterationRecord {
  double mu = 0.0;
  std::size_t classifier_index = 0;
  double tau = 0.0;
  std::size_t removed = 0;
  std::size_t surviving = 0;
  int newton_steps = 0;
};

struct RunRecord {
  std::size_t reference_size = 0;  // |S|
  std::size_t target_size = 0;     // |S'|
  std::size_t initial_survivors = 0;  // |S_0|
  std::size_t removed_by_bound = 0;
  double bound = 0.0;
  double delta = 0.0;
  std::uint64_t iteration_cap = 0;
  std::vector<IterationRecord> iterations;  // filtering iterations only
  double final_mu = 0.0;
  std::size_t final_classifier = 0;
  Termination termination = Termination::converged;
  std::string termination_detail;
  std::vector<Eigen::Index> projector_rank;  // per classifier
  std::vector<std::string> fingerprints;     // per classifier
  bool projector_restricted = false;  // some reference Gram was rank-deficient
  double seconds_constraints = 0.0;
  double seconds_bounding = 0.0;
  double seconds_loop = 0.0;

  std::size_t filtering_iterations() const { return iterations.size(); }
  std::size_t final_survivors() const;
};

struct ICFResult {
  Selector selector;
  RunRecord record;
  /// survived[i] == 1 iff target point i is in the final surviving set.
  std::vector<std::uint8_t> survived;
};

/// Full filtering loop. Throws SolverFailure on solver non-convergence and,
/// with strict_tau, NoValidThreshold.
ICFResult run_icf(const std::vector<Classifier>& family, const Sample& reference,
                  const Sample& target, const ICFConfig& cfg);

}  // namespace pqtds
