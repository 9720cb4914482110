#pragma once

#include "pqtds/bench.hpp"
#include "pqtds/cvxsub.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pqtds::cli {

enum ExitCode : int { ok = 0, check_failed = 1, validation_error = 2, solver_failure = 3 };

enum class Mode { pq, tds, icf };
const char* to_string(Mode m);
Mode parse_mode(const std::string& s);

struct Params {
  double eps = 0.2;
  double eta = 0.3;
  double delta = 0.1;
  double theta = 0.0;
  std::optional<double> slack_r;  // tds: default_R(theta, eps); icf: 2
  std::optional<double> beta;     // icf only; default 4 (2A)^(2l)
  int degree = 1;
  double hyper_a = 1.0;
  bool multilinear = false;
  SolverOptions solver;
  bool strict = false;
  std::size_t n_eval = 5000;
};

struct TrialSpec {
  Mode mode = Mode::pq;
  bench::Scenario scenario;
  std::string scenario_path;
  Params params;
  /// Overrides applied on top of the base parameters, echoed in table rows.
  std::vector<std::pair<std::string, double>> overrides;
  /// Precomputed oracle values; computed inside the trial when unset.
  std::optional<std::optional<bench::OracleLambda>> lambda;
};

struct TrialOutcome {
  TrialSpec spec;
  bool ok = true;
  std::string error;  // "solver: ..." or "validation: ..."
  bench::MetricRecord metrics;
  std::size_t iterations = 0;
  std::string termination;
  double seconds = 0.0;
  std::vector<std::pair<std::string, double>> stages;
  std::vector<std::string> log;

  // artifacts
  std::string record_json;
  std::string selector_text;
  std::string classifier_text;
  std::vector<std::pair<std::string, std::string>> plots;  // suffix, contents

  std::string stem() const;
  std::string summary_line() const;
};

/// Validates the parameters for the mode; throws InvalidArgument.
void validate(Mode mode, const Params& p);

/// One seeded run. With capture set, library errors are recorded in the
/// outcome instead of propagating.
TrialOutcome run_trial(const TrialSpec& spec, bool capture);

/// Total-variation distance between two finite distributions (labels ignored).
double tv_distance(const oracle::FiniteDistribution& a, const oracle::FiniteDistribution& b);

// Results tables ------------------------------------------------------------

std::vector<std::string> trial_columns();
std::vector<std::string> trial_row(const TrialOutcome& t);
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

/// Appends one row to the table at path, creating it with the header when
/// absent. Throws InvalidArgument if an existing table has other columns.
void append_row(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::string>& row);

// Sweeps --------------------------------------------------------------------

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

/// "name=v1,v2,..." with name one of eps, eta, delta, theta, slack-R, beta,
/// degree, hyper-A, n-train, n-test. An empty value list is allowed.
GridAxis parse_axis(const std::string& text);

/// Applies one override to a trial; throws InvalidArgument on unknown names.
void apply_override(TrialSpec& spec, const std::string& name, double value);

/// Cross product of the axes in row-major order (last axis fastest). No axes
/// or any empty axis yields no cells.
std::vector<std::vector<std::pair<std::string, double>>> expand_grid(const std::vector<GridAxis>& axes);

struct SweepResult {
  std::vector<TrialOutcome> trials;  // cell-major, then seed order
  std::vector<std::string> summary_header;
  std::vector<std::vector<std::string>> summary_rows;
  bool aborted = false;
};

/// Runs every (scenario, cell, seed) trial on a worker pool and reduces in a
/// fixed order. With fail_fast, no new trials start after a failure.
SweepResult sweep(Mode mode, const std::vector<std::pair<std::string, bench::Scenario>>& scenarios,
                  const Params& base, const std::vector<GridAxis>& axes,
                  const std::vector<std::uint64_t>& seeds, unsigned workers, bool fail_fast);

// Oracle consistency ----------------------------------------------------------

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Exact hypercube oracle against Monte Carlo on {-1,1}^d.
std::vector<CheckLine> oracle_check(int d, std::size_t mc_n, std::uint64_t seed);

/// Entry point. Log lines go to out, diagnostics to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pqtds::cli
