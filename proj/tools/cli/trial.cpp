#include "cli.hpp"

#include "pqtds/errors.hpp"
#include "pqtds/icf.hpp"
#include "pqtds/io.hpp"
#include "pqtds/l1reg.hpp"
#include "pqtds/pq.hpp"
#include "pqtds/tds.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace pqtds::cli {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json params_json(Mode mode, const Params& p) {
  json j = {{"mode", to_string(mode)},
            {"eps", p.eps},
            {"delta", p.delta},
            {"degree", p.degree},
            {"hyper_A", p.hyper_a},
            {"multilinear", p.multilinear},
            {"strict", p.strict},
            {"n_eval", p.n_eval},
            {"opt_tol", p.solver.opt_tol},
            {"feas_tol", p.solver.feas_tol},
            {"max_newton_steps", p.solver.max_newton_steps}};
  if (mode == Mode::pq) j["eta"] = p.eta;
  if (mode == Mode::tds) j["theta"] = p.theta;
  j["slack_R"] = opt_json(p.slack_r);
  if (mode == Mode::icf) j["beta"] = opt_json(p.beta);
  return j;
}

json run_json(const RunRecord& r) {
  json its = json::array();
  for (const auto& it : r.iterations) {
    its.push_back({{"mu", it.mu},
                   {"classifier", it.classifier_index},
                   {"tau", it.tau},
                   {"removed", it.removed},
                   {"surviving", it.surviving},
                   {"newton_steps", it.newton_steps}});
  }
  return {{"reference_size", r.reference_size},
          {"target_size", r.target_size},
          {"initial_survivors", r.initial_survivors},
          {"removed_by_bound", r.removed_by_bound},
          {"bound", r.bound},
          {"delta", r.delta},
          {"iteration_cap", r.iteration_cap},
          {"iterations", its},
          {"final_mu", r.final_mu},
          {"final_classifier", r.final_classifier},
          {"termination", to_string(r.termination)},
          {"termination_detail", r.termination_detail},
          {"projector_rank", r.projector_rank},
          {"projector_restricted", r.projector_restricted},
          {"fingerprints", r.fingerprints},
          {"seconds", {{"constraints", r.seconds_constraints},
                       {"bounding", r.seconds_bounding},
                       {"loop", r.seconds_loop}}}};
}

json metrics_json(const bench::MetricRecord& m) {
  json j = {{"decision", m.decision}};
  if (m.selective_error) j["selective_error"] = *m.selective_error;
  if (m.test_error) j["test_error"] = *m.test_error;
  if (m.rejection_train) j["rejection_train"] = *m.rejection_train;
  if (m.rejection_test) j["rejection_test"] = *m.rejection_test;
  if (m.lambda) {
    j["lambda"] = {{"lambda", m.lambda->lambda},
                   {"lambda_train", m.lambda->lambda_train},
                   {"lambda_test", m.lambda->lambda_test},
                   {"opt_train", m.lambda->opt_train}};
  }
  if (m.bound) j["bound"] = *m.bound;
  if (m.slack) j["slack"] = *m.slack;
  return j;
}

std::string mu_series(const RunRecord& r) {
  std::ostringstream os;
  os << "# iteration mu\n";
  for (std::size_t t = 0; t < r.iterations.size(); ++t) os << t << ' ' << io::format_real(r.iterations[t].mu) << '\n';
  os << r.iterations.size() << ' ' << io::format_real(r.final_mu) << '\n';
  return os.str();
}

std::string survivor_series(const RunRecord& r) {
  std::ostringstream os;
  os << "# iteration surviving\n0 " << r.initial_survivors << '\n';
  for (std::size_t t = 0; t < r.iterations.size(); ++t) os << t + 1 << ' ' << r.iterations[t].surviving << '\n';
  return os.str();
}

std::string text_of(const Classifier& c) {
  std::ostringstream os;
  io::write_classifier(os, c);
  return os.str();
}

std::string text_of(const Selector& s, const ICFConfig& cfg) {
  std::ostringstream os;
  io::write_selector(os, s, cfg);
  return os.str();
}

template <class Sel>
double rejection_of(const Sel& s, const Sample& pts) {
  return rejection_rate(s, pts);
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::pq: return "pq";
    case Mode::tds: return "tds";
    case Mode::icf: return "icf";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "pq") return Mode::pq;
  if (s == "tds") return Mode::tds;
  if (s == "icf") return Mode::icf;
  throw InvalidArgument("unknown mode '" + s + "' (expected pq, tds or icf)");
}

void validate(Mode mode, const Params& p) {
  if (p.n_eval < 1) throw InvalidArgument("n-eval must be positive");
  if (!(p.solver.opt_tol > 0.0) || !(p.solver.feas_tol > 0.0) || p.solver.max_newton_steps < 1) {
    throw InvalidArgument("solver tolerances must be positive");
  }
  switch (mode) {
    case Mode::pq: {
      PQConfig c;
      c.eps = p.eps;
      c.delta = p.delta;
      c.eta = p.eta;
      c.degree = p.degree;
      c.hyper_a = p.hyper_a;
      c.validate();
      break;
    }
    case Mode::tds: {
      TDSConfig c;
      c.eps = p.eps;
      c.delta = p.delta;
      c.theta = p.theta;
      c.slack_r = p.slack_r;
      c.degree = p.degree;
      c.hyper_a = p.hyper_a;
      c.validate();
      break;
    }
    case Mode::icf: {
      if (p.hyper_a < 1.0) throw InvalidArgument("hyper-A must be >= 1");
      ICFConfig c;
      c.eps = p.eps;
      c.degree = p.degree;
      c.hyper_a = p.hyper_a;
      c.slack_r = p.slack_r.value_or(2.0);
      c.beta = p.beta.value_or(variance_bound(p.hyper_a, p.degree));
      c.validate();
      break;
    }
  }
}

double tv_distance(const oracle::FiniteDistribution& a, const oracle::FiniteDistribution& b) {
  if (a.support.cols() != b.support.cols()) throw DimensionMismatch("tv_distance: dimensions differ");
  std::map<std::vector<double>, double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto x = a.point(i);
    diff[std::vector<double>(x.begin(), x.end())] += a.weights[i];
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto x = b.point(i);
    diff[std::vector<double>(x.begin(), x.end())] -= b.weights[i];
  }
  double s = 0.0;
  for (const auto& [x, w] : diff) s += std::abs(w);
  return 0.5 * s;
}

std::string TrialOutcome::stem() const {
  return spec.scenario.name + "_" + to_string(spec.mode) + "_s" + std::to_string(spec.scenario.seed);
}

std::string TrialOutcome::summary_line() const {
  std::ostringstream os;
  os << "summary: scenario=" << spec.scenario.name << " mode=" << to_string(spec.mode)
     << " seed=" << spec.scenario.seed;
  for (const auto& [k, v] : spec.overrides) os << ' ' << k << '=' << num(v);
  if (!ok) {
    os << " status=FAILED error=\"" << error << '"';
    return os.str();
  }
  os << " decision=" << metrics.decision << " selective_error=" << opt_num(metrics.selective_error)
     << " test_error=" << opt_num(metrics.test_error)
     << " rejection_train=" << opt_num(metrics.rejection_train) << " rejection_test=" << opt_num(metrics.rejection_test)
     << " bound=" << opt_num(metrics.bound) << " iterations=" << iterations << " termination=" << termination
     << " seconds=" << num(seconds) << " status=ok";
  return os.str();
}

TrialOutcome run_trial(const TrialSpec& spec, bool capture) {
  TrialOutcome t;
  t.spec = spec;
  const auto start = Clock::now();
  const Params& p = spec.params;
  auto stage = [&](const char* name, Clock::time_point t0) {
    const double s = since(t0);
    t.stages.emplace_back(name, s);
    t.log.push_back(std::string("stage ") + name + ": " + num(s) + " s");
  };

  try {
    spec.scenario.validate();
    validate(spec.mode, p);

    auto t0 = Clock::now();
    const bench::Generated g = bench::generate(spec.scenario);
    const Sample eval_test = bench::fresh(spec.scenario, bench::Side::test, p.n_eval, 0).sample;
    const Sample eval_train = bench::fresh(spec.scenario, bench::Side::train, p.n_eval, 0).sample;
    stage("generate", t0);

    t0 = Clock::now();
    const std::optional<bench::OracleLambda> lambda =
        spec.lambda ? *spec.lambda : bench::oracle_lambda(spec.scenario);
    stage("oracle", t0);

    json doc;
    doc["config"] = {{"scenario_path", spec.scenario_path},
                     {"scenario", bench::format_scenario(spec.scenario)},
                     {"seed", spec.scenario.seed},
                     {"params", params_json(spec.mode, p)}};
    json overrides = json::object();
    for (const auto& [k, v] : spec.overrides) overrides[k] = v;
    doc["config"]["overrides"] = overrides;

    switch (spec.mode) {
      case Mode::pq: {
        PQConfig cfg;
        cfg.eps = p.eps;
        cfg.delta = p.delta;
        cfg.eta = p.eta;
        cfg.degree = p.degree;
        cfg.hyper_a = p.hyper_a;
        cfg.multilinear = p.multilinear;
        cfg.seed = spec.scenario.seed;
        cfg.solver = p.solver;
        cfg.strict_tau = p.strict;
        t0 = Clock::now();
        PQOutput out = pq_learn(g.train, g.test.unlabeled(), cfg);
        stage("learn", t0);
        t0 = Clock::now();
        t.metrics = bench::evaluate_run(out, cfg, eval_test, eval_train, lambda);
        stage("evaluate", t0);
        doc["kind"] = "pq-run";
        doc["hyperparameters"] = {{"slack_R", out.hyper.slack_r},
                                  {"beta", out.hyper.beta},
                                  {"eps_icf", out.hyper.eps_icf},
                                  {"regression_size", out.regression_size},
                                  {"reference_size", out.reference_size},
                                  {"regression_objective", out.regression_objective},
                                  {"regression_error", out.regression_error}};
        doc["run"] = run_json(out.record);
        t.selector_text = text_of(out.selector, out.icf_config);
        t.classifier_text = text_of(out.classifier);
        t.iterations = out.record.iterations.size();
        t.termination = to_string(out.record.termination);
        t.plots = {{"mu.dat", mu_series(out.record)}, {"survivors.dat", survivor_series(out.record)}};
        doc["selector"] = {{"bound", out.selector.bound()},
                           {"rules", out.selector.rules().size()},
                           {"fingerprints", out.record.fingerprints}};
        break;
      }
      case Mode::tds: {
        TDSConfig cfg;
        cfg.eps = p.eps;
        cfg.delta = p.delta;
        cfg.theta = p.theta;
        cfg.slack_r = p.slack_r;
        cfg.degree = p.degree;
        cfg.hyper_a = p.hyper_a;
        cfg.multilinear = p.multilinear;
        cfg.seed = spec.scenario.seed;
        cfg.solver = p.solver;
        cfg.strict_tau = p.strict;
        t0 = Clock::now();
        TDSVerdict v = tds_learn(g.train, g.test.unlabeled(), cfg);
        stage("learn", t0);
        t0 = Clock::now();
        t.metrics = bench::evaluate_run(v, cfg, eval_test, lambda);
        stage("evaluate", t0);
        doc["kind"] = "tds-run";
        doc["decision"] = to_string(v.decision);
        doc["hyperparameters"] = {{"slack_R", v.slack_r},
                                  {"beta", v.beta},
                                  {"eps_icf", v.eps_icf},
                                  {"threshold", v.threshold},
                                  {"holdout_size", v.holdout_size},
                                  {"holdout_rejection", v.holdout_rejection},
                                  {"regression_objective", v.regression_objective},
                                  {"regression_error", v.regression_error}};
        doc["run"] = run_json(v.record);
        t.selector_text = text_of(v.selector, v.icf_config);
        if (v.classifier) t.classifier_text = text_of(*v.classifier);
        t.iterations = v.record.iterations.size();
        t.termination = to_string(v.record.termination);
        t.plots = {{"mu.dat", mu_series(v.record)}, {"survivors.dat", survivor_series(v.record)}};
        doc["selector"] = {{"bound", v.selector.bound()},
                           {"rules", v.selector.rules().size()},
                           {"fingerprints", v.record.fingerprints}};
        break;
      }
      case Mode::icf: {
        ICFConfig cfg;
        cfg.eps = p.eps;
        cfg.degree = p.degree;
        cfg.hyper_a = p.hyper_a;
        cfg.multilinear = p.multilinear;
        cfg.slack_r = p.slack_r.value_or(2.0);
        cfg.beta = p.beta.value_or(variance_bound(p.hyper_a, p.degree));
        cfg.solver = p.solver;
        cfg.strict_tau = p.strict;
        t0 = Clock::now();
        const BasisPtr basis = make_basis(g.train.dim(), p.degree, p.multilinear);
        const L1Fit fit = fit_l1(basis, g.train);
        const Classifier f = threshold_round(fit.polynomial, g.train);
        stage("regression", t0);
        t0 = Clock::now();
        ICFResult r = run_icf({f, Classifier::complement_of(f)}, g.train.unlabeled(), g.test.unlabeled(), cfg);
        stage("filter", t0);
        t0 = Clock::now();
        bench::MetricRecord m;
        m.decision = "ICF";
        m.selective_error = selective_error(f, r.selector, eval_test);
        m.test_error = empirical_error(f, eval_test);
        m.rejection_train = rejection_of(r.selector, eval_train);
        m.rejection_test = rejection_of(r.selector, eval_test);
        m.lambda = lambda;
        // Training-side rejection guarantee of the filter.
        double bound = (1.0 + cfg.eps) / cfg.slack_r;
        if (spec.scenario.dim() <= 16) {
          if (const auto od = bench::oracle_distributions(spec.scenario)) {
            bound = std::min(bound, (tv_distance(od->train, od->test) + cfg.eps) / (cfg.slack_r - 1.0));
          }
        }
        m.bound = bound;
        m.slack = bound - *m.rejection_train;
        t.metrics = m;
        stage("evaluate", t0);
        const Schedule sch = compute_schedule(cfg, g.train.dim());
        doc["kind"] = "icf-run";
        doc["hyperparameters"] = {{"slack_R", cfg.slack_r},
                                  {"beta", cfg.beta},
                                  {"eps", cfg.eps},
                                  {"B", sch.bound},
                                  {"Delta", sch.delta},
                                  {"regression_objective", fit.objective}};
        doc["run"] = run_json(r.record);
        t.selector_text = text_of(r.selector, cfg);
        t.classifier_text = text_of(f);
        t.iterations = r.record.iterations.size();
        t.termination = to_string(r.record.termination);
        t.plots = {{"mu.dat", mu_series(r.record)}, {"survivors.dat", survivor_series(r.record)}};
        doc["selector"] = {{"bound", r.selector.bound()},
                           {"rules", r.selector.rules().size()},
                           {"fingerprints", r.record.fingerprints}};
        break;
      }
    }
    t.seconds = since(start);
    doc["metrics"] = metrics_json(t.metrics);
    json stages = json::object();
    for (const auto& [k, v] : t.stages) stages[k] = v;
    stages["total"] = t.seconds;
    doc["timings"] = stages;
    t.record_json = doc.dump(2) + "\n";
  } catch (const InvalidArgument& e) {
    if (!capture) throw;
    t.ok = false;
    t.error = std::string("validation: ") + e.what();
  } catch (const Error& e) {
    if (!capture) throw;
    t.ok = false;
    t.error = std::string("solver: ") + e.what();
  }
  t.seconds = since(start);
  t.log.push_back(t.summary_line());
  return t;
}

std::vector<std::string> trial_columns() {
  return {"scenario", "mode",  "seed",           "overrides",     "eps",
          "eta",      "delta", "theta",          "slack_R",       "degree",
          "hyper_A",  "multilinear", "n_train",  "n_test",        "status",
          "decision", "selective_error", "test_error", "rejection_train", "rejection_test",
          "lambda",   "lambda_train", "lambda_test", "opt_train",  "bound",
          "slack",    "iterations", "termination", "seconds"};
}

std::vector<std::string> trial_row(const TrialOutcome& t) {
  const auto& s = t.spec;
  const auto& p = s.params;
  std::string ov;
  for (const auto& [k, v] : s.overrides) ov += (ov.empty() ? "" : ";") + k + "=" + num(v);
  const auto& m = t.metrics;
  const auto lam = [&](double bench::OracleLambda::*f) { return m.lambda ? num((*m.lambda).*f) : "NA"; };
  return {s.scenario.name,
          to_string(s.mode),
          std::to_string(s.scenario.seed),
          ov.empty() ? "-" : ov,
          num(p.eps),
          s.mode == Mode::pq ? num(p.eta) : "NA",
          num(p.delta),
          s.mode == Mode::tds ? num(p.theta) : "NA",
          opt_num(p.slack_r),
          std::to_string(p.degree),
          num(p.hyper_a),
          p.multilinear ? "1" : "0",
          std::to_string(s.scenario.n_train),
          std::to_string(s.scenario.n_test),
          t.ok ? "ok" : "failed",
          t.ok ? m.decision : "NA",
          opt_num(m.selective_error),
          opt_num(m.test_error),
          opt_num(m.rejection_train),
          opt_num(m.rejection_test),
          lam(&bench::OracleLambda::lambda),
          lam(&bench::OracleLambda::lambda_train),
          lam(&bench::OracleLambda::lambda_test),
          lam(&bench::OracleLambda::opt_train),
          opt_num(m.bound),
          opt_num(m.slack),
          t.ok ? std::to_string(t.iterations) : "NA",
          t.ok ? t.termination : "NA",
          num(t.seconds)};
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::string s;
  auto line = [&s](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "\t" : "") + cells[i];
    s += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return s;
}

}  // namespace pqtds::cli
