#pragma once

// Synthetic covariate-shift scenarios, target concepts, exact oracle
// distributions for the finite cases, and per-run metric records.

#include "pqtds/oracle.hpp"
#include "pqtds/polycore.hpp"
#include "pqtds/pq.hpp"
#include "pqtds/tds.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pqtds::bench {

struct MarginalSpec {
  enum class Kind { hypercube, gaussian, finite };
  Kind kind = Kind::hypercube;
  int dim = 8;
  // finite only
  RowMatrix support;
  std::vector<double> weights;
};

struct ShiftSpec {
  enum class Kind { none, subcube, mixture, mean_shift };
  enum class Cloud { scaled_cube, gaussian_blob };
  Kind kind = Kind::none;
  /// Probability that a test point comes from the shifted component.
  double weight = 0.0;
  /// subcube: (0-based coordinate, sign) pairs fixed on the shifted component.
  std::vector<std::pair<int, int>> pattern;
  /// mixture: scaled cube {-scale,+scale}^d or N(center, scale^2 I).
  Cloud cloud = Cloud::scaled_cube;
  double scale = 3.0;
  std::vector<double> center;
  /// mean_shift: shifted component is N(mean, I).
  std::vector<double> mean;
  /// Label the shifted component with 1 - concept.
  bool flip_labels = false;
};

struct ConceptSpec {
  enum class Kind { conjunction, halfspace, dnf, ptf2 };
  Kind kind = Kind::conjunction;
  /// Signed 1-based literals: +i means x_i = +1, -i means x_i = -1.
  std::vector<int> literals;
  /// halfspace: 1{w.x + bias >= 0}.
  std::vector<double> weights;
  double bias = 0.0;
  /// dnf: OR of conjunction terms.
  std::vector<std::vector<int>> terms;
  /// ptf2: 1{x^T Q x + w.x + bias >= 0}, Q row-major d x d.
  std::vector<double> quad;

  int operator()(std::span<const double> x) const;
  std::string describe() const;
};

struct Scenario {
  std::string name = "scenario";
  MarginalSpec marginal;
  ShiftSpec shift;
  ConceptSpec concept_spec;
  std::optional<ConceptSpec> test_concept;
  double noise_train = 0.0;
  double noise_test = 0.0;
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
  int dim() const { return marginal.dim; }
};

struct Draw {
  Sample sample;  // labeled
  /// from_shift[i] == 1 iff point i came from the shifted component.
  std::vector<std::uint8_t> from_shift;
};

enum class Side { train, test };

/// n labeled points from one side of the scenario; pure function of the arguments.
Draw draw(const Scenario& scn, Side side, std::size_t n, std::uint64_t seed);

struct Generated {
  Sample train;
  Sample test;
  std::vector<std::uint8_t> test_from_shift;
};

/// Train and test samples of the configured sizes from scn.seed.
Generated generate(const Scenario& scn);

/// Fresh samples for evaluation, independent of generate() for the same seed.
Draw fresh(const Scenario& scn, Side side, std::size_t n, std::uint64_t stream);

/// Exact labeled train/test distributions when both marginals have finite
/// support (hypercube up to the enumeration limit, finite marginals, subcube
/// and scaled-cube shifts).
struct OracleDistributions {
  oracle::FiniteDistribution train;
  oracle::FiniteDistribution test;
};
std::optional<OracleDistributions> oracle_distributions(const Scenario& scn);

/// Conjunctions of at most max_literals literals over d variables, including
/// the empty conjunction (constant 1) and constant 0.
class ConjunctionClass final : public oracle::ConceptClass {
 public:
  ConjunctionClass(int d, int max_literals);
  std::size_t size() const override { return terms_.size() + 1; }
  int label(std::size_t idx, std::span<const double> x) const override;
  std::string describe(std::size_t idx) const override;

 private:
  std::vector<std::vector<int>> terms_;
};

/// Halfspaces 1{w.x + b >= 0} with integer weights in [-w_max, w_max] and
/// biases in [-bias_max, bias_max].
class HalfspaceClass final : public oracle::ConceptClass {
 public:
  HalfspaceClass(int d, int w_max, int bias_max);
  std::size_t size() const override { return count_; }
  int label(std::size_t idx, std::span<const double> x) const override;
  std::string describe(std::size_t idx) const override;

 private:
  void decode(std::size_t idx, std::vector<int>& w, int& b) const;

  int d_;
  int w_max_;
  int bias_max_;
  std::size_t count_;
};

/// Enumerable class matching the scenario's concept kind (conjunctions for
/// conjunction targets, weight-grid halfspaces for halfspace targets), or
/// nothing when no finite class is defined for that kind.
std::unique_ptr<oracle::ConceptClass> concept_class_for(const Scenario& scn);

struct DegreeRecommendation {
  int degree = 0;
  bool heuristic = true;
  std::string formula;
};

/// Degree from the sandwiching facts with every hidden constant set to 1.
/// Recognized tags: ac0 (size, depth), dnf (size; depth 2), dt_halfspaces
/// (depth, size), ptf2_gaussian, ptf2_hypercube, ptf (k = degree),
/// k_halfspaces (k), halfspace. Throws InvalidArgument on unknown tags.
DegreeRecommendation recommend_degree(const std::string& class_tag, double eps,
                                      const std::map<std::string, double>& params = {});

struct OracleLambda {
  double lambda = 0.0;
  double lambda_train = 0.0;
  double lambda_test = 0.0;
  double opt_train = 0.0;
};

struct MetricRecord {
  std::string decision;  // "PQ", "ACCEPT" or "REJECT"
  std::optional<double> selective_error;
  std::optional<double> test_error;  // unconditional error of the classifier
  std::optional<double> rejection_train;
  std::optional<double> rejection_test;
  std::optional<OracleLambda> lambda;
  std::optional<double> bound;
  std::optional<double> slack;  // bound - measured
};

/// PQ metrics on fresh labeled test points and fresh training points. The
/// bound is lambda_test + (lambda_train + opt_train)/eta + eps when lambda
/// is known.
MetricRecord evaluate_run(const PQOutput& out, const PQConfig& cfg, const Sample& labeled_test,
                          const Sample& fresh_train, const std::optional<OracleLambda>& lambda);

/// TDS metrics. A REJECT verdict carries the decision only.
MetricRecord evaluate_run(const TDSVerdict& v, const TDSConfig& cfg, const Sample& labeled_test,
                          const std::optional<OracleLambda>& lambda);

std::optional<OracleLambda> oracle_lambda(const Scenario& scn);

/// Scenario file: "key = value" lines grouped under [section] headers,
/// '#' comments. Sections: scenario, marginal, shift, concept, test_concept.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string format_scenario(const Scenario& scn);

}  // namespace pqtds::bench
