#include "cli.hpp"

#include "pqtds/errors.hpp"
#include "pqtds/io.hpp"
#include "pqtds/oracle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace pqtds::cli {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

const std::vector<std::string>& axis_names() {
  static const std::vector<std::string> names = {"eps",    "eta",     "delta",   "theta",  "slack-R",
                                                 "beta",   "degree",  "hyper-A", "n-train", "n-test"};
  return names;
}

struct Stat {
  std::vector<double> xs;
  std::string mean() const {
    if (xs.empty()) return "NA";
    return num(std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size()));
  }
  std::string sd() const {
    if (xs.size() < 2) return "NA";
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return num(std::sqrt(ss / static_cast<double>(xs.size() - 1)));
  }
  void add(const std::optional<double>& v) {
    if (v) xs.push_back(*v);
  }
};

const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> m = {"selective_error", "test_error", "rejection_train", "rejection_test",
                                             "bound",           "slack",      "iterations",      "seconds"};
  return m;
}

std::optional<double> metric_of(const TrialOutcome& t, const std::string& name) {
  const auto& m = t.metrics;
  if (name == "selective_error") return m.selective_error;
  if (name == "test_error") return m.test_error;
  if (name == "rejection_train") return m.rejection_train;
  if (name == "rejection_test") return m.rejection_test;
  if (name == "bound") return m.bound;
  if (name == "slack") return m.slack;
  if (name == "iterations") return static_cast<double>(t.iterations);
  if (name == "seconds") return t.seconds;
  return std::nullopt;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw InvalidArgument("grid: '" + tok + "' is not a number");
    out.push_back(v);
  }
  return out;
}

std::size_t as_count(double v, const std::string& name) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e12) throw InvalidArgument(name + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

void append_row(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::string>& row) {
  std::string existing;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    existing = buf.str();
  }
  const std::string head = format_table(header, {});
  if (existing.empty()) {
    existing = head;
  } else if (existing.compare(0, head.size(), head) != 0) {
    throw InvalidArgument("results table '" + path + "' has different columns");
  }
  io::atomic_write(path, existing + format_table(header, {row}).substr(head.size()));
}

GridAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw InvalidArgument("grid axis '" + text + "' must look like name=v1,v2");
  GridAxis a{text.substr(0, eq), parse_list(text.substr(eq + 1))};
  const auto& names = axis_names();
  if (std::find(names.begin(), names.end(), a.name) == names.end()) {
    throw InvalidArgument("unknown grid axis '" + a.name + "'");
  }
  return a;
}

void apply_override(TrialSpec& spec, const std::string& name, double value) {
  Params& p = spec.params;
  if (name == "eps") p.eps = value;
  else if (name == "eta") p.eta = value;
  else if (name == "delta") p.delta = value;
  else if (name == "theta") p.theta = value;
  else if (name == "slack-R") p.slack_r = value;
  else if (name == "beta") p.beta = value;
  else if (name == "hyper-A") p.hyper_a = value;
  else if (name == "degree") {
    if (value != std::floor(value) || value < 0 || value > 64) throw InvalidArgument("degree must be a small integer");
    p.degree = static_cast<int>(value);
  } else if (name == "n-train") spec.scenario.n_train = as_count(value, "n-train");
  else if (name == "n-test") spec.scenario.n_test = as_count(value, "n-test");
  else throw InvalidArgument("unknown override '" + name + "'");
  spec.overrides.emplace_back(name, value);
}

std::vector<std::vector<std::pair<std::string, double>>> expand_grid(const std::vector<GridAxis>& axes) {
  std::vector<std::vector<std::pair<std::string, double>>> cells;
  if (axes.empty()) return cells;
  for (const auto& a : axes) {
    if (a.values.empty()) return cells;
  }
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    std::vector<std::pair<std::string, double>> cell;
    for (std::size_t i = 0; i < axes.size(); ++i) cell.emplace_back(axes[i].name, axes[i].values[idx[i]]);
    cells.push_back(std::move(cell));
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].values.size()) break;
      idx[k] = 0;
      if (k == 0) return cells;
    }
  }
}

SweepResult sweep(Mode mode, const std::vector<std::pair<std::string, bench::Scenario>>& scenarios,
                  const Params& base, const std::vector<GridAxis>& axes,
                  const std::vector<std::uint64_t>& seeds, unsigned workers, bool fail_fast) {
  const auto cells = expand_grid(axes);
  std::vector<TrialSpec> specs;
  struct Group {
    std::string scenario;
    std::vector<std::pair<std::string, double>> cell;
    std::size_t first, count;
  };
  std::vector<Group> groups;
  for (const auto& [path, scn] : scenarios) {
    if (cells.empty() || seeds.empty()) break;
    scn.validate();
    const auto lambda = bench::oracle_lambda(scn);
    for (const auto& cell : cells) {
      groups.push_back({scn.name, cell, specs.size(), seeds.size()});
      for (const auto seed : seeds) {
        TrialSpec s;
        s.mode = mode;
        s.scenario = scn;
        s.scenario.seed = seed;
        s.scenario_path = path;
        s.params = base;
        s.lambda = lambda;
        for (const auto& [k, v] : cell) apply_override(s, k, v);
        validate(mode, s.params);
        specs.push_back(std::move(s));
      }
    }
  }

  SweepResult res;
  std::vector<std::optional<TrialOutcome>> slots(specs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      slots[i] = run_trial(specs[i], true);
      if (fail_fast && !slots[i]->ok) stop.store(true);
    }
  };
  const unsigned n_workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // Reduction in fixed spec order, independent of completion order.
  for (auto& s : slots) {
    if (!s) {
      res.aborted = true;
      continue;
    }
    if (!s->ok && fail_fast) res.aborted = true;
    res.trials.push_back(std::move(*s));
  }

  res.summary_header = {"scenario", "mode"};
  for (const auto& a : axes) res.summary_header.push_back(a.name);
  for (const char* c : {"trials", "failed", "accept_rate"}) res.summary_header.emplace_back(c);
  for (const auto& m : summary_metrics()) {
    res.summary_header.push_back(m + "_mean");
    res.summary_header.push_back(m + "_sd");
  }
  if (res.aborted) return res;

  for (const auto& g : groups) {
    std::vector<std::string> row = {g.scenario, to_string(mode)};
    for (const auto& [k, v] : g.cell) row.push_back(num(v));
    std::size_t failed = 0, accepted = 0;
    std::map<std::string, Stat> stats;
    for (std::size_t i = g.first; i < g.first + g.count; ++i) {
      const auto& t = res.trials[i];
      if (!t.ok) {
        ++failed;
        continue;
      }
      if (t.metrics.decision == "ACCEPT") ++accepted;
      for (const auto& m : summary_metrics()) stats[m].add(metric_of(t, m));
    }
    const std::size_t good = g.count - failed;
    row.push_back(std::to_string(g.count));
    row.push_back(std::to_string(failed));
    row.push_back(mode == Mode::tds && good > 0 ? num(static_cast<double>(accepted) / static_cast<double>(good)) : "NA");
    for (const auto& m : summary_metrics()) {
      row.push_back(stats[m].mean());
      row.push_back(stats[m].sd());
    }
    res.summary_rows.push_back(std::move(row));
  }
  return res;
}

std::vector<CheckLine> oracle_check(int d, std::size_t mc_n, std::uint64_t seed) {
  if (d < 1 || d > 20) throw InvalidArgument("oracle-check: d must be in [1, 20]");
  if (mc_n < 100) throw InvalidArgument("oracle-check: need at least 100 Monte Carlo draws");
  std::vector<CheckLine> lines;
  const int a = 0, b = 1 % d, c = 2 % d;

  auto cube_sample = [&](std::size_t n, std::uint64_t s) {
    std::mt19937_64 rng(derive_seed(seed, s));
    RowMatrix pts(static_cast<Eigen::Index>(n), d);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      for (int j = 0; j < d; ++j) pts(i, j) = (rng() >> 63) ? 1.0 : -1.0;
    }
    return pts;
  };

  // Expectations of a few test functions.
  {
    const std::vector<std::pair<std::string, oracle::PointFn>> fns = {
        {"x_a x_b", [=](std::span<const double> x) { return x[a] * x[b]; }},
        {"1{x_a>0, x_b<0}", [=](std::span<const double> x) { return x[a] > 0 && x[b] < 0 ? 1.0 : 0.0; }},
        {"majority", [](std::span<const double> x) {
           double s = 0.0;
           for (double v : x) s += v;
           return s >= 0 ? 1.0 : 0.0;
         }},
        {"1 + x_a + x_b x_c / 2", [=](std::span<const double> x) { return 1.0 + x[a] + 0.5 * x[b] * x[c]; }},
    };
    const RowMatrix pts = cube_sample(mc_n, 1);
    for (const auto& [name, g] : fns) {
      const double exact = oracle::exact_expectation_hypercube(d, g);
      const double second = oracle::exact_expectation_hypercube(d, [&](std::span<const double> x) {
        const double v = g(x);
        return v * v;
      });
      std::vector<double> vals(mc_n);
      for (std::size_t i = 0; i < mc_n; ++i) {
        vals[i] = g({pts.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)});
      }
      const double mc = oracle::pairwise_sum(vals) / static_cast<double>(mc_n);
      const double se = std::sqrt(std::max(second - exact * exact, 0.0) / static_cast<double>(mc_n));
      const double tol = 5.0 * se + 1e-12;
      lines.push_back({"expectation " + name, std::abs(mc - exact) <= tol,
                       "exact " + num(exact) + ", monte carlo " + num(mc) + ", tolerance " + num(tol)});
    }
  }

  // Degree-1 Chow parameters of a conjunction.
  {
    const auto basis = make_basis(d, 1, true);
    const Classifier f = Classifier::external(
        "conj", [=](std::span<const double> x) { return x[a] > 0 && (d == 1 || x[b] < 0) ? 1 : 0; });
    const Vector exact = oracle::exact_chow(f, *basis, d);
    const RowMatrix pts = cube_sample(mc_n, 2);
    Vector mc = Vector::Zero(exact.size());
    Vector feat;
    for (std::size_t i = 0; i < mc_n; ++i) {
      const std::span<const double> x{pts.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
      if (!f(x)) continue;
      feat = basis->features(x);
      for (Eigen::Index j = 0; j < mc.size(); ++j) mc[j] += feat[j];
    }
    mc /= static_cast<double>(mc_n);
    const double p1 = exact[0];
    const double tol = 5.0 * std::sqrt(p1 / static_cast<double>(mc_n)) + 1e-12;
    const double worst = (mc - exact).cwiseAbs().maxCoeff();
    lines.push_back({"chow degree 1", worst <= tol,
                     "max |exact - monte carlo| " + num(worst) + " over " + std::to_string(exact.size()) +
                         " coefficients, tolerance " + num(tol)});
  }

  // lambda from empirical distributions against the exact value.
  {
    bench::Scenario scn;
    scn.name = "oracle_check";
    scn.marginal.dim = d;
    scn.concept_spec.literals = d >= 2 ? std::vector<int>{1, -2} : std::vector<int>{1};
    scn.shift.kind = bench::ShiftSpec::Kind::subcube;
    scn.shift.weight = 0.3;
    scn.shift.pattern = {{a, 1}, {c, -1}};
    if (c == a) scn.shift.pattern.pop_back();
    scn.shift.flip_labels = true;
    scn.noise_train = 0.05;
    scn.seed = seed;
    const auto od = bench::oracle_distributions(scn);
    const auto cls = bench::concept_class_for(scn);
    if (!od || !cls) throw InvalidArgument("oracle-check: scenario has no exact oracle");
    const auto exact = oracle::exact_lambda(*cls, od->train, od->test);

    auto empirical = [&](bench::Side side, std::size_t n, std::uint64_t stream) {
      const bench::Draw dr = bench::draw(scn, side, n, derive_seed(seed, stream));
      const Sample& s = dr.sample;
      std::map<std::pair<std::vector<double>, int>, double> atoms;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto x = s.point(i);
        atoms[{std::vector<double>(x.begin(), x.end()), s.label(i)}] += 1.0 / static_cast<double>(n);
      }
      oracle::FiniteDistribution fd;
      fd.support.resize(static_cast<Eigen::Index>(atoms.size()), d);
      std::vector<std::uint8_t> labels;
      Eigen::Index r = 0;
      for (const auto& [key, w] : atoms) {
        for (int j = 0; j < d; ++j) fd.support(r, j) = key.first[static_cast<std::size_t>(j)];
        fd.weights.push_back(w);
        labels.push_back(static_cast<std::uint8_t>(key.second));
        ++r;
      }
      fd.labels = std::move(labels);
      return fd;
    };
    // Uniform deviation over the class: Hoeffding with a union bound at 1e-6.
    const auto tol_for = [&](std::size_t n) {
      return 2.0 * std::sqrt(std::log(4.0 * static_cast<double>(cls->size()) / 1e-6) / (2.0 * static_cast<double>(n)));
    };
    for (const std::size_t n : {std::max<std::size_t>(mc_n / 16, 100), mc_n}) {
      const auto emp = oracle::exact_lambda(*cls, empirical(bench::Side::train, n, 3 + n),
                                            empirical(bench::Side::test, n, 4 + n));
      const double dev = std::abs(emp.lambda - exact.lambda);
      lines.push_back({"lambda n=" + std::to_string(n), dev <= tol_for(n),
                       "exact " + num(exact.lambda) + ", empirical " + num(emp.lambda) + ", |diff| " + num(dev) +
                           ", tolerance " + num(tol_for(n)) + " over " + std::to_string(cls->size()) + " concepts"});
    }
  }
  return lines;
}

namespace {

struct RunConfig {
  std::vector<std::string> scenarios;
  std::string out_dir = "pqtds-out";
  std::optional<std::uint64_t> seed;
  std::optional<double> eps, eta, delta, theta, slack_r, beta, hyper_a;
  std::optional<int> degree;
  std::optional<std::size_t> n_train, n_test;
  std::size_t n_eval = 5000;
  std::optional<double> opt_tol, feas_tol;
  std::optional<int> max_newton;
  bool strict = false;
  bool multilinear = false;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  bool emit_plot_data = false;
  bool save_data = false;
  // sweep
  std::string mode = "pq";
  std::vector<std::string> grid;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> trials;
  bool fail_fast = false;
  // oracle-check
  int d = 10;
  std::size_t mc_n = 200000;
};

Params params_from(const RunConfig& rc) {
  Params p;
  if (rc.eps) p.eps = *rc.eps;
  if (rc.eta) p.eta = *rc.eta;
  if (rc.delta) p.delta = *rc.delta;
  if (rc.theta) p.theta = *rc.theta;
  p.slack_r = rc.slack_r;
  p.beta = rc.beta;
  if (rc.hyper_a) p.hyper_a = *rc.hyper_a;
  if (rc.degree) p.degree = *rc.degree;
  if (rc.opt_tol) p.solver.opt_tol = *rc.opt_tol;
  if (rc.feas_tol) p.solver.feas_tol = *rc.feas_tol;
  if (rc.max_newton) p.solver.max_newton_steps = *rc.max_newton;
  p.strict = rc.strict;
  p.multilinear = rc.multilinear;
  p.n_eval = rc.n_eval;
  return p;
}

bench::Scenario scenario_from(const RunConfig& rc, const std::string& path) {
  bench::Scenario s = bench::load_scenario(path);
  if (rc.seed) s.seed = *rc.seed;
  if (rc.n_train) s.n_train = *rc.n_train;
  if (rc.n_test) s.n_test = *rc.n_test;
  s.validate();
  return s;
}

class Log {
 public:
  explicit Log(std::ostream& out) : out_(out) {}
  void line(const std::string& s) {
    out_ << s << '\n';
    text_ += s + '\n';
  }
  const std::string& text() const { return text_; }

 private:
  std::ostream& out_;
  std::string text_;
};

void echo_config(Log& log, const std::string& sub, const RunConfig& rc, const Params& p) {
  std::ostringstream os;
  os << "config: command=" << sub;
  for (const auto& s : rc.scenarios) os << " scenario=" << s;
  os << " out=" << rc.out_dir << " eps=" << num(p.eps) << " eta=" << num(p.eta) << " delta=" << num(p.delta)
     << " theta=" << num(p.theta) << " slack_R=" << (p.slack_r ? num(*p.slack_r) : "default")
     << " beta=" << (p.beta ? num(*p.beta) : "default") << " degree=" << p.degree << " hyper_A=" << num(p.hyper_a)
     << " multilinear=" << p.multilinear << " opt_tol=" << num(p.solver.opt_tol)
     << " feas_tol=" << num(p.solver.feas_tol) << " max_newton=" << p.solver.max_newton_steps
     << " n_eval=" << p.n_eval << " mode=" << (p.strict ? "strict" : "lenient");
  if (rc.seed) os << " seed=" << *rc.seed;
  if (rc.n_train) os << " n_train=" << *rc.n_train;
  if (rc.n_test) os << " n_test=" << *rc.n_test;
  log.line(os.str());
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

int single_run(Mode mode, const std::string& sub, const RunConfig& rc, std::ostream& out) {
  if (rc.scenarios.size() != 1) throw InvalidArgument(sub + " takes exactly one --scenario");
  Log log(out);
  const Params p = params_from(rc);
  echo_config(log, sub, rc, p);
  TrialSpec spec;
  spec.mode = mode;
  spec.scenario_path = rc.scenarios.front();
  spec.scenario = scenario_from(rc, spec.scenario_path);
  spec.params = p;
  validate(mode, p);

  const TrialOutcome t = run_trial(spec, false);
  for (const auto& l : t.log) log.line(l);

  const std::string stem = t.stem();
  auto path = [&](const std::string& suffix) { return join_path(rc.out_dir, stem + "." + suffix); };
  io::atomic_write(path("run.json"), t.record_json);
  io::atomic_write(path("selector.txt"), t.selector_text);
  if (!t.classifier_text.empty()) io::atomic_write(path("classifier.txt"), t.classifier_text);
  if (rc.emit_plot_data) {
    for (const auto& [suffix, text] : t.plots) io::atomic_write(path(suffix), text);
  }
  if (rc.save_data) {
    const auto g = bench::generate(spec.scenario);
    std::ostringstream tr, te;
    io::write_csv(tr, g.train);
    io::write_csv(te, g.test);
    io::atomic_write(path("train.csv"), tr.str());
    io::atomic_write(path("test.csv"), te.str());
  }
  append_row(join_path(rc.out_dir, "results.tsv"), trial_columns(), trial_row(t));
  log.line("wrote " + path("run.json") + ", " + path("selector.txt") + " and a row in " +
           join_path(rc.out_dir, "results.tsv"));
  io::atomic_write(path("log"), log.text());
  return ExitCode::ok;
}

int sweep_run(const RunConfig& rc, std::ostream& out) {
  Log log(out);
  const Mode mode = parse_mode(rc.mode);
  const Params p = params_from(rc);
  echo_config(log, "bench-sweep", rc, p);
  if (rc.scenarios.empty()) throw InvalidArgument("bench-sweep needs at least one --scenario");
  std::vector<std::pair<std::string, bench::Scenario>> scenarios;
  for (const auto& s : rc.scenarios) scenarios.emplace_back(s, scenario_from(rc, s));

  std::vector<GridAxis> axes;
  for (const auto& g : rc.grid) axes.push_back(parse_axis(g));
  std::vector<std::uint64_t> seeds = rc.seeds;
  if (rc.trials) {
    const std::uint64_t base = rc.seed.value_or(scenarios.front().second.seed);
    for (std::size_t i = 0; i < *rc.trials; ++i) seeds.push_back(base + i);
  }
  if (seeds.empty() && !rc.trials) seeds.push_back(rc.seed.value_or(scenarios.front().second.seed));
  {
    std::ostringstream os;
    os << "grid:";
    for (const auto& a : axes) {
      os << ' ' << a.name << "={";
      for (std::size_t i = 0; i < a.values.size(); ++i) os << (i ? "," : "") << num(a.values[i]);
      os << '}';
    }
    os << " seeds=" << seeds.size() << " cells=" << expand_grid(axes).size() << " workers=" << rc.workers;
    log.line(os.str());
  }

  const auto t0 = std::chrono::steady_clock::now();
  const SweepResult res = sweep(mode, scenarios, p, axes, seeds, rc.workers, rc.fail_fast);
  for (const auto& t : res.trials) {
    for (const auto& l : t.log) log.line(l);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t failed = 0;
  for (const auto& t : res.trials) failed += t.ok ? 0 : 1;
  log.line("stage sweep: " + num(secs) + " s");
  if (res.aborted) {
    log.line("sweep aborted after a failed trial; no tables written");
    io::atomic_write(join_path(rc.out_dir, "sweep.log"), log.text());
    return ExitCode::solver_failure;
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& t : res.trials) rows.push_back(trial_row(t));
  io::atomic_write(join_path(rc.out_dir, "sweep_trials.tsv"), format_table(trial_columns(), rows));
  io::atomic_write(join_path(rc.out_dir, "sweep_summary.tsv"), format_table(res.summary_header, res.summary_rows));
  if (rc.emit_plot_data) {
    // x is the first axis value for one-axis grids, else the cell index.
    const std::size_t first_metric = res.summary_header.size() - 2 * summary_metrics().size();
    for (std::size_t m = 0; m < summary_metrics().size(); ++m) {
      std::string text = "# " + (axes.size() == 1 ? axes.front().name : std::string("cell")) + " " +
                         summary_metrics()[m] + "_mean\n";
      for (std::size_t r = 0; r < res.summary_rows.size(); ++r) {
        const auto& row = res.summary_rows[r];
        const std::string x = axes.size() == 1 ? row[2] : std::to_string(r);
        text += x + " " + row[first_metric + 2 * m] + "\n";
      }
      io::atomic_write(join_path(rc.out_dir, "sweep_" + summary_metrics()[m] + ".dat"), text);
    }
  }
  log.line("sweep done: " + std::to_string(res.trials.size()) + " trials, " + std::to_string(failed) +
           " failed, " + std::to_string(res.summary_rows.size()) + " cells");
  io::atomic_write(join_path(rc.out_dir, "sweep.log"), log.text());
  return ExitCode::ok;
}

int oracle_run(const RunConfig& rc, std::ostream& out) {
  Log log(out);
  log.line("config: command=oracle-check d=" + std::to_string(rc.d) + " mc_n=" + std::to_string(rc.mc_n) +
           " seed=" + std::to_string(rc.seed.value_or(0)));
  const auto t0 = std::chrono::steady_clock::now();
  const auto lines = oracle_check(rc.d, rc.mc_n, rc.seed.value_or(0));
  bool all = true;
  for (const auto& l : lines) {
    log.line(std::string(l.pass ? "[PASS] " : "[FAIL] ") + l.name + ": " + l.detail);
    all = all && l.pass;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log.line("summary: oracle-check d=" + std::to_string(rc.d) + " checks=" + std::to_string(lines.size()) +
           " result=" + (all ? "PASS" : "FAIL") + " seconds=" + num(secs));
  return all ? ExitCode::ok : ExitCode::check_failed;
}

void add_model_options(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--scenario", rc.scenarios, "Scenario file")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", rc.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--seed", rc.seed, "Seed (overrides the scenario's)");
  sub->add_option("--eps", rc.eps, "Accuracy parameter epsilon");
  sub->add_option("--eta", rc.eta, "Rejection budget eta (pq)");
  sub->add_option("--delta", rc.delta, "Failure probability delta");
  sub->add_option("--theta", rc.theta, "Tolerated TV distance theta (tds)");
  sub->add_option("--slack-R", rc.slack_r, "Slack ratio R (tds, icf)");
  sub->add_option("--beta", rc.beta, "Variance bound beta (icf)");
  sub->add_option("--degree", rc.degree, "Polynomial degree l");
  sub->add_option("--hyper-A", rc.hyper_a, "Hypercontractivity constant A");
  sub->add_flag("--multilinear,!--no-multilinear", rc.multilinear, "Multilinear monomial basis");
  sub->add_option("--n-train", rc.n_train, "Training sample size");
  sub->add_option("--n-test", rc.n_test, "Test sample size");
  sub->add_option("--n-eval", rc.n_eval, "Fresh evaluation points per side")->capture_default_str();
  sub->add_option("--opt-tol", rc.opt_tol, "Solver optimality tolerance");
  sub->add_option("--feas-tol", rc.feas_tol, "Solver feasibility tolerance");
  sub->add_option("--max-newton", rc.max_newton, "Solver Newton step cap");
  sub->add_flag("--strict", rc.strict, "Fail the run when no valid threshold exists");
  sub->add_flag("--emit-plot-data", rc.emit_plot_data, "Write (x,y) series files");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"PQ learning and tolerant TDS learning with iterative Chow filtering", "pqtds"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* pq = app.add_subcommand("pq-run", "Learn a classifier and selector on one scenario");
  auto* tds = app.add_subcommand("tds-run", "Tolerant TDS learning on one scenario");
  auto* icf = app.add_subcommand("icf-run", "Filter the test sample against the training sample");
  for (auto* s : {pq, tds, icf}) {
    add_model_options(s, rc);
    s->add_flag("--save-data", rc.save_data, "Also write the generated train/test CSVs");
  }
  auto* sw = app.add_subcommand("bench-sweep", "Cross product of overrides and seeds");
  add_model_options(sw, rc);
  sw->add_option("--mode", rc.mode, "pq, tds or icf")->capture_default_str();
  sw->add_option("--grid", rc.grid, "Axis name=v1,v2,... (repeatable)")->allow_extra_args(false);
  sw->add_option("--seeds", rc.seeds, "Seed list")->delimiter(',');
  sw->add_option("--trials", rc.trials, "Seeds base..base+trials-1");
  sw->add_option("--workers", rc.workers, "Worker threads")->capture_default_str();
  sw->add_flag("--fail-fast", rc.fail_fast, "Abort the sweep on the first failed trial");
  auto* oc = app.add_subcommand("oracle-check", "Exact oracles against Monte Carlo on the hypercube");
  oc->add_option("--d", rc.d, "Dimension")->capture_default_str();
  oc->add_option("--mc-n", rc.mc_n, "Monte Carlo draws")->capture_default_str();
  oc->add_option("--seed", rc.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ExitCode::ok : ExitCode::validation_error;
  }

  try {
    if (*pq) return single_run(Mode::pq, "pq-run", rc, out);
    if (*tds) return single_run(Mode::tds, "tds-run", rc, out);
    if (*icf) return single_run(Mode::icf, "icf-run", rc, out);
    if (*sw) return sweep_run(rc, out);
    return oracle_run(rc, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::validation_error;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::validation_error;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return ExitCode::solver_failure;
  } catch (const NoValidThreshold& e) {
    err << "solver failure: " << e.what() << '\n';
    return ExitCode::solver_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::check_failed;
  }
}

}  // namespace pqtds::cli
