// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; exit status is nonzero if any criterion fails.

#include "pqtds/bench.hpp"
#include "pqtds/cvxsub.hpp"
#include "pqtds/errors.hpp"
#include "pqtds/icf.hpp"
#include "pqtds/l1reg.hpp"
#include "pqtds/oracle.hpp"
#include "pqtds/polycore.hpp"
#include "pqtds/pq.hpp"
#include "pqtds/tds.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace pqtds;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Multilinear indicator of a conjunction over signed 1-based literals:
// prod (1 + s_i x_i) / 2, exactly 0/1 on the hypercube.
Polynomial conjunction_polynomial(const BasisPtr& basis, const std::vector<int>& lits) {
  Polynomial p = Polynomial::zero(basis);
  const std::size_t k = lits.size();
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    std::vector<std::uint8_t> exps(static_cast<std::size_t>(basis->dimension()), 0);
    double sign = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      if ((mask >> j) & 1u) {
        exps[static_cast<std::size_t>(std::abs(lits[j]) - 1)] = 1;
        if (lits[j] < 0) sign = -sign;
      }
    }
    p = p + Polynomial::monomial(basis, exps, sign / static_cast<double>(1u << k));
  }
  return p;
}

// ---------------------------------------------------------------- 1
Outcome schedule_formulas() {
  struct Tuple {
    double r, beta, eps;
    int d, l;
  };
  const std::vector<Tuple> tuples = {
      {2, 1, 0.5, 1, 1},     {4, 4, 0.5, 3, 1},     {1.5, 2, 0.1, 5, 2},  {3.335, 64, 0.000625, 8, 2},
      {1.158, 64, 1.8e-4, 8, 2}, {10, 0.25, 0.9, 2, 0}, {1.01, 1e-3, 0.3, 20, 3}, {2.5, 7, 0.05, 4, 4},
      {100, 1e4, 0.99, 1, 6}, {1.2, 0.5, 0.2, 12, 1}, {6, 3, 0.45, 6, 2},   {1.0001, 1, 1e-6, 2, 1}};
  double worst = 0.0;
  for (const auto& t : tuples) {
    ICFConfig cfg;
    cfg.slack_r = t.r;
    cfg.beta = t.beta;
    cfg.eps = t.eps;
    cfg.degree = t.l;
    const Schedule s = compute_schedule(cfg, t.d);
    // Independent evaluation in extended precision.
    const long double grow = std::pow(static_cast<long double>(t.d) + 1.0L, t.l);
    const long double b = std::sqrt(8.0L * t.r * grow * t.beta / t.eps);
    const long double delta = static_cast<long double>(t.eps) * t.eps / (b * (2.0L * t.r + t.eps));
    worst = std::max(worst, static_cast<double>(std::abs((s.bound - b) / b)));
    worst = std::max(worst, static_cast<double>(std::abs((s.delta - delta) / delta)));
  }
  ICFConfig c1;
  c1.slack_r = 2;
  c1.beta = 1;
  c1.eps = 0.5;
  const Schedule s1 = compute_schedule(c1, 1);
  const double e1 = std::max(std::abs(s1.bound - 8.0) / 8.0, std::abs(s1.delta - 1.0 / 144.0) * 144.0);
  ICFConfig c2;
  c2.slack_r = 4;
  c2.beta = 4;
  c2.eps = 0.5;
  const Schedule s2 = compute_schedule(c2, 3);
  const double e2 = std::max(std::abs(s2.bound - 32.0) / 32.0, std::abs(s2.delta - 0.25 / 272.0) * 272.0 / 0.25);
  worst = std::max({worst, e1, e2});
  return {worst <= 1e-12, fmt("%zu tuples + 2 closed forms, worst relative error %.2e (B=8 case: B=%.17g, Delta=%.17g)",
                              tuples.size(), worst, s1.bound, s1.delta)};
}

// ---------------------------------------------------------------- 2, 3
struct RandomRunStats {
  int runs = 0;
  int failures = 0;  // exceptions
  int cap_violations = 0;
  int removal_violations = 0;
  int consistency_violations = 0;
  std::size_t max_iterations = 0;
  std::size_t total_iterations = 0;
  std::string first_problem;
};

RandomRunStats random_icf_runs() {
  RandomRunStats st;
  std::mt19937_64 rng(20240611);
  auto unif = [&](double a, double b) { return a + (b - a) * std::uniform_real_distribution<double>(0, 1)(rng); };
  auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  for (int run = 0; run < 200; ++run) {
    bench::Scenario scn;
    scn.seed = rng();
    scn.marginal.dim = pick(1, 6);
    scn.marginal.kind = pick(0, 2) == 0 ? bench::MarginalSpec::Kind::gaussian : bench::MarginalSpec::Kind::hypercube;
    const int d = scn.marginal.dim;
    switch (pick(0, 3)) {
      case 0:
        break;
      case 1:
        scn.shift.kind = bench::ShiftSpec::Kind::subcube;
        scn.shift.weight = unif(0.2, 1.0);
        scn.shift.pattern = {{pick(0, d - 1), pick(0, 1) ? 1 : -1}};
        break;
      case 2:
        scn.shift.kind = bench::ShiftSpec::Kind::mixture;
        scn.shift.weight = unif(0.05, 0.6);
        scn.shift.cloud = pick(0, 1) ? bench::ShiftSpec::Cloud::scaled_cube : bench::ShiftSpec::Cloud::gaussian_blob;
        scn.shift.scale = unif(1.5, 4.0);
        break;
      default:
        if (scn.marginal.kind == bench::MarginalSpec::Kind::gaussian) {
          scn.shift.kind = bench::ShiftSpec::Kind::mean_shift;
          scn.shift.weight = unif(0.2, 1.0);
          scn.shift.mean.assign(static_cast<std::size_t>(d), 0.0);
          for (double& m : scn.shift.mean) m = unif(-1.5, 1.5);
        }
        break;
    }
    scn.concept_spec.literals = {1};
    const std::size_t n_ref = static_cast<std::size_t>(pick(20, 400));
    const std::size_t n_tgt = static_cast<std::size_t>(pick(20, 400));
    const Sample ref = bench::draw(scn, bench::Side::train, n_ref, scn.seed).sample.unlabeled();
    Sample tgt = bench::draw(scn, bench::Side::test, n_tgt, scn.seed + 1).sample.unlabeled();

    ICFConfig cfg;
    cfg.degree = pick(0, 2);
    cfg.slack_r = unif(1.1, 4.0);
    cfg.eps = unif(0.05, 0.6);
    cfg.beta = unif(0.25, 4.0);
    cfg.multilinear = scn.marginal.kind == bench::MarginalSpec::Kind::hypercube && pick(0, 1);

    // Random polynomial threshold, its complement and sometimes constant 1.
    const BasisPtr basis = make_basis(d, std::max(cfg.degree, 1), cfg.multilinear);
    Vector coef(static_cast<Eigen::Index>(basis->size()));
    for (auto& c : coef) c = unif(-1, 1);
    const Classifier f = Classifier::threshold(Polynomial(basis, coef), unif(-0.5, 0.5));
    std::vector<Classifier> family{f, Classifier::complement_of(f)};
    if (pick(0, 2) == 0) family.push_back(Classifier::constant(1));

    ++st.runs;
    try {
      const ICFResult res = run_icf(family, ref, tgt, cfg);
      const auto& rec = res.record;
      const std::size_t t = rec.filtering_iterations();
      st.max_iterations = std::max(st.max_iterations, t);
      st.total_iterations += t;
      if (static_cast<double>(t) > std::floor(1.0 / rec.delta)) {
        ++st.cap_violations;
        if (st.first_problem.empty()) st.first_problem = fmt("run %d: t=%zu > floor(1/Delta)", run, t);
      }
      for (const auto& it : rec.iterations) {
        if (static_cast<double>(it.removed) < rec.delta * static_cast<double>(n_tgt)) {
          ++st.removal_violations;
          if (st.first_problem.empty()) {
            st.first_problem = fmt("run %d: removed %zu < Delta|S'| = %.3f", run, it.removed, rec.delta * n_tgt);
          }
        }
      }
      for (std::size_t i = 0; i < n_tgt; ++i) {
        if (res.selector(tgt.point(i)) != res.survived[i]) {
          ++st.consistency_violations;
          if (st.first_problem.empty()) st.first_problem = fmt("run %d: selector disagrees at point %zu", run, i);
        }
      }
    } catch (const Error& e) {
      ++st.failures;
      if (st.first_problem.empty()) st.first_problem = fmt("run %d: %s", run, e.what());
    }
  }
  return st;
}

const RandomRunStats& random_runs_cached() {
  static const RandomRunStats st = random_icf_runs();
  return st;
}

Outcome iteration_bound() {
  const auto& st = random_runs_cached();
  const bool ok = st.failures == 0 && st.cap_violations == 0 && st.removal_violations == 0;
  return {ok, fmt("%d runs, %d failed, %d cap violations, %d removal violations; iterations max %zu total %zu%s%s",
                  st.runs, st.failures, st.cap_violations, st.removal_violations, st.max_iterations,
                  st.total_iterations, st.first_problem.empty() ? "" : "; first: ", st.first_problem.c_str())};
}

Outcome run_selector_consistency() {
  const auto& st = random_runs_cached();
  const bool ok = st.failures == 0 && st.consistency_violations == 0;
  return {ok, fmt("%d runs, %d disagreements between selector and surviving set", st.runs,
                  st.consistency_violations)};
}

// ---------------------------------------------------------------- 4
Outcome identical_samples() {
  int zero = 0;
  int failed = 0;
  std::mt19937_64 rng(77);
  for (int run = 0; run < 50; ++run) {
    bench::Scenario scn;
    scn.seed = rng();
    scn.marginal.dim = 2 + run % 5;
    scn.marginal.kind = run % 2 ? bench::MarginalSpec::Kind::gaussian : bench::MarginalSpec::Kind::hypercube;
    scn.concept_spec.literals = {1, -2};
    const Sample s = bench::draw(scn, bench::Side::train, 100 + 10 * static_cast<std::size_t>(run), scn.seed).sample;
    ICFConfig cfg;
    cfg.degree = 1 + run % 2;
    cfg.slack_r = 1.05 + 0.1 * (run % 10);
    cfg.eps = 0.02 + 0.019 * (run % 50);
    cfg.beta = 1.0 + run % 3;
    const BasisPtr fbasis = make_basis(s.dim(), 2, false);
    const Classifier f = Classifier::threshold(conjunction_polynomial(fbasis, {1, -2}), 0.5);
    try {
      const auto res = run_icf({f, Classifier::complement_of(f)}, s.unlabeled(), s.unlabeled(), cfg);
      if (res.record.filtering_iterations() == 0) ++zero;
    } catch (const Error&) {
      ++failed;
    }
  }
  return {zero == 50, fmt("%d/50 runs with S'=S stopped at t=0 (%d failed)", zero, failed)};
}

// ---------------------------------------------------------------- 5, 6
struct ShiftRun {
  double rejected = 0.0;
  double rejection_bound = 0.0;
  bool chow_ok = true;
  std::string chow_note;
};

// Probe polynomials with exact E[p^2] <= beta under the uniform hypercube.
std::vector<Polynomial> probe_set(const BasisPtr& basis, double beta) {
  std::vector<Polynomial> probes;
  const int d = basis->dimension();
  auto scaled = [&](Polynomial p, double frac) {
    const double m2 = oracle::exact_expectation_hypercube(d, [&](std::span<const double> x) {
      const double v = p(x);
      return v * v;
    });
    return p * std::sqrt(frac * beta / m2);
  };
  const std::vector<std::vector<int>> terms = {{1}, {1, 2}, {-3}, {2, -4}, {5, 6}, {1, -7}, {8}, {3, 4}};
  for (std::size_t i = 0; i < terms.size(); ++i) {
    std::vector<std::uint8_t> e(static_cast<std::size_t>(d), 0);
    for (int l : terms[i]) e[static_cast<std::size_t>(std::abs(l) - 1)] = 1;
    probes.push_back(scaled(Polynomial::monomial(basis, e, terms[i][0] < 0 ? -1.0 : 1.0), i % 2 ? 1.0 : 0.25));
  }
  probes.push_back(scaled(conjunction_polynomial(basis, {1, 2}), 1.0));
  probes.push_back(scaled(Polynomial::constant(basis, 1.0) + conjunction_polynomial(basis, {-1, 3}) * -2.0, 0.5));
  return probes;
}

ShiftRun shift_run(double r, double eps, std::uint64_t seed, const std::vector<Polynomial>& probes, int variant) {
  bench::Scenario scn;
  scn.marginal.dim = 8;
  scn.concept_spec.literals = {1, 2};
  scn.seed = seed;
  switch (variant % 4) {
    case 0:
      scn.shift.kind = bench::ShiftSpec::Kind::subcube;
      scn.shift.weight = 0.6;
      scn.shift.pattern = {{0, 1}, {1, 1}};
      break;
    case 1:
      scn.shift.kind = bench::ShiftSpec::Kind::subcube;
      scn.shift.weight = 1.0;
      scn.shift.pattern = {{0, -1}, {2, 1}, {3, 1}};
      break;
    case 2:
      scn.shift.kind = bench::ShiftSpec::Kind::mixture;
      scn.shift.weight = 0.3;
      scn.shift.scale = 3.0;
      scn.shift.flip_labels = true;
      break;
    default:
      scn.shift.kind = bench::ShiftSpec::Kind::mixture;
      scn.shift.weight = 0.5;
      scn.shift.cloud = bench::ShiftSpec::Cloud::gaussian_blob;
      scn.shift.scale = 1.5;
      break;
  }
  const std::size_t n = 4000;
  const auto reg = bench::draw(scn, bench::Side::train, n, derive_seed(seed, 1)).sample;
  const Sample ref = bench::draw(scn, bench::Side::train, n, derive_seed(seed, 2)).sample.unlabeled();
  const Sample tgt = bench::draw(scn, bench::Side::test, n, derive_seed(seed, 3)).sample.unlabeled();

  ICFConfig cfg;
  cfg.degree = 2;
  cfg.slack_r = r;
  cfg.eps = eps;
  cfg.beta = variance_bound(1.0, 2);
  cfg.multilinear = true;
  const BasisPtr basis = make_basis(8, 2, true);
  const Classifier fhat = threshold_round(fit_l1(basis, reg).polynomial, reg);
  const std::vector<Classifier> family{fhat, Classifier::complement_of(fhat)};
  const ICFResult res = run_icf(family, ref, tgt, cfg);

  ShiftRun out;
  const std::size_t n_fresh = 2000;
  const Sample fresh_train = bench::draw(scn, bench::Side::train, n_fresh, derive_seed(seed, 4)).sample.unlabeled();
  out.rejected = rejection_rate(res.selector, fresh_train);
  out.rejection_bound = (1.0 + eps) / r + 4.0 * std::sqrt(std::log(200.0) / (2.0 * n_fresh));

  // Chow-type domination on fresh draws from both sides.
  const std::size_t n_eval = 20000;
  const Sample fresh_test = bench::draw(scn, bench::Side::test, n_eval, derive_seed(seed, 5)).sample.unlabeled();
  const Sample fresh_ref = bench::draw(scn, bench::Side::train, n_eval, derive_seed(seed, 6)).sample.unlabeled();
  std::vector<std::uint8_t> sel(n_eval);
  for (std::size_t i = 0; i < n_eval; ++i) sel[i] = static_cast<std::uint8_t>(res.selector(fresh_test.point(i)));
  const double factor = (r + eps) * (1.0 + eps);
  for (std::size_t k = 0; k < family.size(); ++k) {
    for (std::size_t j = 0; j < probes.size(); ++j) {
      double s1 = 0, s2 = 0, t1 = 0, t2 = 0;
      for (std::size_t i = 0; i < n_eval; ++i) {
        const auto x = fresh_test.point(i);
        const double v = sel[i] && family[k](x) ? probes[j](x) : 0.0;
        s1 += v;
        s2 += v * v;
        const auto y = fresh_ref.point(i);
        const double u = family[k](y) ? std::abs(probes[j](y)) : 0.0;
        t1 += u;
        t2 += u * u;
      }
      const double nn = static_cast<double>(n_eval);
      const double lhs = s1 / nn;
      const double rhs_mean = t1 / nn;
      const double var_l = std::max(0.0, s2 / nn - lhs * lhs) / nn;
      const double var_r = std::max(0.0, t2 / nn - rhs_mean * rhs_mean) / nn;
      const double se = std::sqrt(var_l + factor * factor * var_r);
      const double rhs = factor * rhs_mean + 2.0 * eps + 3.0 * se;
      if (lhs > rhs && out.chow_ok) {
        out.chow_ok = false;
        out.chow_note = fmt("f%zu probe %zu: %.4f > %.4f", k, j, lhs, rhs);
      }
    }
  }
  return out;
}

struct ShiftSummary {
  std::vector<std::string> rejection_lines;
  std::vector<std::string> chow_lines;
  bool rejection_ok = true;
  bool chow_ok = true;
};

const ShiftSummary& shift_runs_cached() {
  static const ShiftSummary summary = [] {
    ShiftSummary s;
    const BasisPtr basis = make_basis(8, 2, true);
    const auto probes = probe_set(basis, variance_bound(1.0, 2));
    for (double r : {2.0, 4.0}) {
      for (double eps : {0.1, 0.3}) {
        int rej_ok = 0, chow_ok = 0;
        double worst = 0.0;
        std::string note;
        for (int seed = 0; seed < 20; ++seed) {
          const auto run = shift_run(r, eps, 1000 + static_cast<std::uint64_t>(seed), probes, seed);
          if (run.rejected <= run.rejection_bound) ++rej_ok;
          worst = std::max(worst, run.rejected);
          if (run.chow_ok) ++chow_ok;
          else if (note.empty()) note = run.chow_note;
        }
        const double bound = (1.0 + eps) / r + 4.0 * std::sqrt(std::log(200.0) / 4000.0);
        s.rejection_lines.push_back(fmt("R=%g eps=%g: %d/20 within %.3f (max rejected %.3f)", r, eps, rej_ok, bound, worst));
        s.chow_lines.push_back(fmt("R=%g eps=%g: %d/20%s%s", r, eps, chow_ok, note.empty() ? "" : " first miss ", note.c_str()));
        s.rejection_ok = s.rejection_ok && rej_ok >= 19;
        s.chow_ok = s.chow_ok && chow_ok >= 19;
      }
    }
    return s;
  }();
  return summary;
}

std::string join_lines(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

Outcome rejection_bound() {
  const auto& s = shift_runs_cached();
  return {s.rejection_ok, join_lines(s.rejection_lines)};
}

Outcome chow_transfer() {
  const auto& s = shift_runs_cached();
  return {s.chow_ok, join_lines(s.chow_lines)};
}

// ---------------------------------------------------------------- 7
Outcome pq_end_to_end() {
  bench::Scenario scn;
  scn.marginal.dim = 8;
  scn.concept_spec.literals = {1, 2};
  scn.shift.kind = bench::ShiftSpec::Kind::subcube;
  scn.shift.weight = 0.5;
  scn.shift.pattern = {{0, 1}, {2, -1}};
  scn.n_train = 10000;  // 5000 for regression, 5000 for the reference sample
  scn.n_test = 5000;
  const auto lam = bench::oracle_lambda(scn);
  if (!lam) return {false, "oracle lambda unavailable"};
  int good = 0;
  double worst_err = 0.0, worst_rej = 0.0;
  const double bound = lam->lambda_test + (lam->lambda_train + lam->opt_train) / 0.3 + 0.2;
  for (int seed = 0; seed < 20; ++seed) {
    scn.seed = 500 + static_cast<std::uint64_t>(seed);
    const auto g = bench::generate(scn);
    PQConfig cfg;
    cfg.eta = 0.3;
    cfg.eps = 0.2;
    cfg.degree = 2;
    cfg.seed = scn.seed;
    const PQOutput out = pq_learn(g.train, g.test.unlabeled(), cfg);
    const auto eval_test = bench::fresh(scn, bench::Side::test, 5000, 0).sample;
    const auto eval_train = bench::fresh(scn, bench::Side::train, 5000, 0).sample;
    const auto m = bench::evaluate_run(out, cfg, eval_test, eval_train, lam);
    worst_err = std::max(worst_err, *m.selective_error);
    worst_rej = std::max(worst_rej, *m.rejection_train);
    if (*m.selective_error <= bound && *m.rejection_train <= cfg.eta) ++good;
  }
  return {good >= 18, fmt("%d/20 seeds with selective error <= %.3f and rejection <= 0.3 (lambda=%.3g, worst error %.4f, worst rejection %.4f)",
                          good, bound, lam->lambda, worst_err, worst_rej)};
}

// ---------------------------------------------------------------- 8
Outcome tds_completeness_soundness() {
  const double theta = 0.05, eps = 0.2;
  bench::Scenario same;
  same.marginal.dim = 8;
  same.concept_spec.literals = {1, 2};
  same.n_train = 20000;
  same.n_test = 20000;
  int accepted = 0;
  for (int seed = 0; seed < 20; ++seed) {
    same.seed = 900 + static_cast<std::uint64_t>(seed);
    const auto g = bench::generate(same);
    TDSConfig cfg;
    cfg.eps = eps;
    cfg.theta = theta;
    cfg.degree = 2;
    cfg.seed = same.seed;
    if (tds_learn(g.train, g.test.unlabeled(), cfg).decision == Decision::accept) ++accepted;
  }

  bench::Scenario shifted = same;
  shifted.shift.kind = bench::ShiftSpec::Kind::mixture;
  shifted.shift.weight = 0.06;
  shifted.shift.scale = 3.0;
  shifted.shift.flip_labels = true;
  const auto lam = bench::oracle_lambda(shifted);
  if (!lam) return {false, "oracle lambda unavailable"};
  int sound_accepts = 0, sound_ok = 0;
  double worst_margin = 1.0;
  for (int seed = 0; seed < 20; ++seed) {
    shifted.seed = 1900 + static_cast<std::uint64_t>(seed);
    const auto g = bench::generate(shifted);
    TDSConfig cfg;
    cfg.eps = eps;
    cfg.theta = theta;
    cfg.degree = 2;
    cfg.seed = shifted.seed;
    const auto v = tds_learn(g.train, g.test.unlabeled(), cfg);
    if (v.decision != Decision::accept) continue;
    ++sound_accepts;
    const auto eval = bench::fresh(shifted, bench::Side::test, 20000, 0).sample;
    const auto m = bench::evaluate_run(v, cfg, eval, lam);
    const double err = *m.test_error;
    const double se = std::sqrt(err * (1.0 - err) / static_cast<double>(eval.size()));
    const double margin = *m.bound + 3.0 * se - err;
    worst_margin = std::min(worst_margin, margin);
    if (margin >= 0.0) ++sound_ok;
  }
  const bool ok = accepted >= 18 && sound_ok == sound_accepts;
  return {ok, fmt("completeness %d/20 ACCEPT (R=%.4f); soundness %d/%d accepting runs within bound (worst margin %.4f, lambda_test=%.4f)",
                  accepted, default_R(theta, eps), sound_ok, sound_accepts, worst_margin, lam->lambda_test)};
}

// ---------------------------------------------------------------- 9
Outcome oracle_equivalence() {
  const int d = 10;
  const BasisPtr basis = make_basis(d, 2, true);
  const auto k = static_cast<Eigen::Index>(basis->size());
  bool ok = true;
  std::string note;

  const Sample cube(oracle::hypercube_points(d));
  const Matrix exact_gram = empirical_gram(*basis, cube);
  const double gram_dev = (exact_gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
  ok = ok && gram_dev <= 1e-12;

  const auto majority = Classifier::external("maj3", [](std::span<const double> x) {
    return x[0] + x[1] + x[2] > 0 ? 1 : 0;
  });
  const Vector chow = oracle::exact_chow(majority, *basis, d);
  auto g = [](std::span<const double> x) { return 1.0 + x[0] * x[3] - 0.5 * x[5] + (x[7] > 0 ? 2.0 : 0.0); };
  const double g_exact = oracle::exact_expectation_hypercube(d, g);
  const double g2_exact = oracle::exact_expectation_hypercube(d, [&](std::span<const double> x) { return g(x) * g(x); });

  double worst_z = 0.0;
  std::mt19937_64 rng(4242);
  for (std::size_t n : {std::size_t{1000}, std::size_t{10000}, std::size_t{100000}}) {
    RowMatrix pts(static_cast<Eigen::Index>(n), d);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = (rng() >> 63) ? -1.0 : 1.0;
    const Sample s(std::move(pts));
    const double nn = static_cast<double>(n);
    const Matrix gram = empirical_gram(*basis, s);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        const double var = a == b ? 0.0 : 1.0;  // chi_a chi_b is +-1 off the diagonal
        const double dev = std::abs(gram(a, b) - exact_gram(a, b));
        if (var == 0.0) {
          if (dev > 1e-12) ok = false;
          continue;
        }
        worst_z = std::max(worst_z, dev / std::sqrt(var / nn));
      }
    }
    const RowMatrix feats = feature_matrix(*basis, s);
    for (Eigen::Index a = 0; a < k; ++a) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += majority(s.point(i)) * feats(static_cast<Eigen::Index>(i), a);
      const double mean_f = chow[0];
      const double var = mean_f - chow[a] * chow[a];  // f chi_a squared is f
      const double dev = std::abs(sum / nn - chow[a]);
      if (var <= 0.0) {
        if (dev > 1e-12) ok = false;
        continue;
      }
      worst_z = std::max(worst_z, dev / std::sqrt(var / nn));
    }
    double gs = 0.0;
    for (std::size_t i = 0; i < n; ++i) gs += g(s.point(i));
    worst_z = std::max(worst_z, std::abs(gs / nn - g_exact) / std::sqrt((g2_exact - g_exact * g_exact) / nn));
  }
  ok = ok && worst_z <= 5.0;
  return {ok, fmt("exact Gram deviation from identity %.2e; worst standardized Monte-Carlo deviation %.2f over Gram, Chow and expectation at n=1e3,1e4,1e5%s",
                  gram_dev, worst_z, note.c_str())};
}

// ---------------------------------------------------------------- 10
Outcome solver_contract() {
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> normal;
  auto unif = [&](double a, double b) { return a + (b - a) * std::uniform_real_distribution<double>(0, 1)(rng); };
  const SolverOptions opts;
  int ok_count = 0;
  double worst_gap = -1e300, worst_res = -1e300, worst_sym = 0.0;
  std::string note;
  for (int inst = 0; inst < 100; ++inst) {
    // Basis sizes 2, 3 and 3.
    const int d = inst % 3 == 2 ? 2 : 1;
    const int l = inst % 3 == 1 ? 2 : 1;
    const BasisPtr basis = make_basis(d, l, false);
    const std::size_t n = 8 + static_cast<std::size_t>(inst % 20);
    RowMatrix pts(static_cast<Eigen::Index>(n), d);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = normal(rng);
    const Sample s(std::move(pts));
    const Classifier f = Classifier::threshold(
        Polynomial(basis, Vector::NullaryExpr(static_cast<Eigen::Index>(basis->size()), [&] { return unif(-1, 1); })), 0.0);
    const double beta = unif(0.2, 3.0), eps = unif(0.05, 0.9), r = unif(1.1, 4.0);
    const ConstraintSet cs = build_constraint_set(f, s, basis, beta, eps, r);
    Vector a(static_cast<Eigen::Index>(basis->size()));
    for (auto& v : a) v = normal(rng);
    const WitnessSolution sol = solve_witness(a, cs, opts);
    bool ok = sol.ok();
    worst_res = std::max({worst_res, sol.quad_residual, sol.abs_residual});
    ok = ok && sol.quad_residual <= opts.feas_tol && sol.abs_residual <= opts.feas_tol;

    // Dense grid over the whitened ball.
    const Eigen::Index rk = cs.rank;
    const Vector at = cs.unwhiten.transpose() * a;
    const double rho = std::sqrt(cs.quad_bound);
    const int per_axis = rk == 1 ? 20001 : rk == 2 ? 801 : 101;
    const double h = 2.0 * rho / (per_axis - 1);
    double grid_best = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(rk), 0);
    Vector z(rk);
    for (;;) {
      for (Eigen::Index j = 0; j < rk; ++j) z[j] = -rho + h * idx[static_cast<std::size_t>(j)];
      if (z.squaredNorm() <= rho * rho) {
        const double absv = cs.abs_weights.dot((cs.abs_rows_white * z).cwiseAbs());
        if (absv <= cs.abs_bound) grid_best = std::max(grid_best, at.dot(z));
      }
      Eigen::Index j = 0;
      while (j < rk && ++idx[static_cast<std::size_t>(j)] == per_axis) idx[static_cast<std::size_t>(j++)] = 0;
      if (j == rk) break;
    }
    // A grid point lies within h sqrt(r)/2 of the shrunken optimum (1 - lam) z*.
    double lip = 0.0;
    for (Eigen::Index i = 0; i < cs.abs_rows_white.rows(); ++i) lip += cs.abs_weights[i] * cs.abs_rows_white.row(i).norm();
    const double half_diag = 0.5 * h * std::sqrt(static_cast<double>(rk));
    const double lam = std::min(1.0, half_diag * std::max(1.0 / rho, lip / cs.abs_bound));
    const double resolution = lam * std::abs(sol.value) + at.norm() * half_diag;
    const double gap_up = grid_best - sol.value;   // solver must not lose to the grid
    const double gap_down = sol.value - grid_best;  // grid within resolution of the solver
    ok = ok && gap_up <= 2.0 * opts.opt_tol && gap_down <= 2.0 * opts.opt_tol + resolution;
    worst_gap = std::max(worst_gap, std::max(gap_up, gap_down - resolution));

    // Symmetry: max |p(x)| = max p(x) = max -p(x).
    const auto x = s.point(static_cast<std::size_t>(inst) % n);
    const double mabs = max_abs_at_point(x, cs, opts);
    const Vector m = basis->features(x);
    const double plus = solve_witness(m, cs, opts).value;
    const double minus = solve_witness(-m, cs, opts).value;
    const double sym = std::max(std::abs(mabs - plus), std::abs(plus - minus));
    worst_sym = std::max(worst_sym, sym);
    ok = ok && sym <= opts.opt_tol * std::max(1.0, plus);
    if (ok) ++ok_count;
    else if (note.empty()) note = fmt(" first miss: instance %d gap_up %.2e gap_down %.2e res %.2e sym %.2e", inst, gap_up, gap_down, resolution, sym);
  }
  return {ok_count == 100, fmt("%d/100 instances: worst grid gap beyond allowance %.2e, worst residual %.2e, worst symmetry gap %.2e%s",
                               ok_count, worst_gap, worst_res, worst_sym, note.c_str())};
}

// ---------------------------------------------------------------- 11
Outcome l1_regression() {
  struct Target {
    const char* name;
    int d, l;
    bool multilinear;
    std::function<int(std::span<const double>)> f;
  };
  const std::vector<Target> targets = {
      {"x1 & x2, d=8, l=2", 8, 2, true, [](auto x) { return x[0] > 0 && x[1] > 0; }},
      {"x1 & !x3 & x4, d=6, l=3", 6, 3, true, [](auto x) { return x[0] > 0 && x[2] < 0 && x[3] > 0; }},
      {"maj(x1,x2,x3), d=7, l=3", 7, 3, true, [](auto x) { return x[0] + x[1] + x[2] > 0; }},
      {"x2 == x5, d=8, l=2", 8, 2, true, [](auto x) { return x[1] * x[4] > 0; }},
      {"x1 | x2, d=10, l=2", 10, 2, false, [](auto x) { return x[0] > 0 || x[1] > 0; }},
  };
  const double eps = 0.05;
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(99);
  for (const auto& t : targets) {
    auto draw_cube = [&](std::size_t n) {
      RowMatrix pts(static_cast<Eigen::Index>(n), t.d);
      for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = (rng() >> 63) ? -1.0 : 1.0;
      std::vector<std::uint8_t> y(n);
      Sample s(std::move(pts));
      for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::uint8_t>(t.f(s.point(i)));
      s.labels = std::move(y);
      return s;
    };
    const BasisPtr basis = make_basis(t.d, t.l, t.multilinear);
    const Sample train = draw_cube(2000);
    const Sample test = draw_cube(5000);
    const L1Fit fit = fit_l1(basis, train);
    const Classifier h = threshold_round(fit.polynomial, train);
    const double err = empirical_error(h, test);
    ok = ok && err <= eps;
    detail += fmt("%s: held-out error %.4f, objective %.2e; ", t.name, err, fit.objective);
  }
  RowMatrix pts(3, 1);
  pts << 1.0, -1.0, 1.0;
  const Sample median(std::move(pts), std::vector<std::uint8_t>{0, 0, 1});
  const L1Fit mfit = fit_l1(make_basis(1, 0, false), median);
  const bool median_ok = std::abs(mfit.objective - 1.0 / 3.0) <= 1e-12 && std::abs(mfit.polynomial.coefficients[0]) <= 1e-12;
  ok = ok && median_ok;
  detail += fmt("median case: objective %.17g, constant %.3g", mfit.objective, mfit.polynomial.coefficients[0]);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> all = {
      {1, "schedule formulas", schedule_formulas},
      {2, "iteration bound and per-step removal", iteration_bound},
      {3, "run/selector consistency", run_selector_consistency},
      {4, "identical samples stop at t=0", identical_samples},
      {5, "rejection rate on fresh training points", rejection_bound},
      {6, "Chow-type domination on selected test points", chow_transfer},
      {7, "PQ end-to-end", pq_end_to_end},
      {8, "TDS completeness and soundness", tds_completeness_soundness},
      {9, "oracle equivalence", oracle_equivalence},
      {10, "solver contract", solver_contract},
      {11, "L1 regression", l1_regression},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("[%s] %2d %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
