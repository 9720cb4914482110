#include "pqtds/bench.hpp"
#include "pqtds/cvxsub.hpp"
#include "pqtds/icf.hpp"
#include "pqtds/l1reg.hpp"

#include <benchmark/benchmark.h>

using namespace pqtds;

namespace {

bench::Scenario cube(int d, std::size_t n, bool shifted) {
  bench::Scenario s;
  s.marginal.dim = d;
  s.concept_spec.literals = {1, -2};
  s.n_train = n;
  s.n_test = n;
  s.seed = 17;
  if (shifted) {
    s.shift.kind = bench::ShiftSpec::Kind::subcube;
    s.shift.weight = 0.5;
    s.shift.pattern = {{0, 1}, {2, -1}};
  }
  return s;
}

void BM_Gram(benchmark::State& st) {
  const int d = static_cast<int>(st.range(0));
  const auto g = bench::generate(cube(d, 4000, false));
  const auto b = make_basis(d, 2, false);
  for (auto _ : st) benchmark::DoNotOptimize(empirical_gram(*b, g.train));
  st.counters["basis"] = static_cast<double>(b->size());
}
BENCHMARK(BM_Gram)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Witness(benchmark::State& st) {
  const int d = static_cast<int>(st.range(0));
  const auto g = bench::generate(cube(d, 2000, true));
  const auto b = make_basis(d, 2, false);
  const Classifier f = Classifier::external("x1", [](std::span<const double> x) { return x[0] > 0 ? 1 : 0; });
  const auto cs = build_constraint_set(f, g.train.unlabeled(), b, 4.0, 0.1, 2.0);
  Vector a = Vector::Zero(static_cast<Eigen::Index>(b->size()));
  for (std::size_t i = 0; i < g.test.size(); ++i) {
    if (f(g.test.point(i))) a += b->features(g.test.point(i));
  }
  a /= static_cast<double>(g.test.size());
  for (auto _ : st) benchmark::DoNotOptimize(solve_witness(a, cs));
}
BENCHMARK(BM_Witness)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_FitL1(benchmark::State& st) {
  const auto g = bench::generate(cube(8, static_cast<std::size_t>(st.range(0)), false));
  const auto b = make_basis(8, 2, true);
  for (auto _ : st) benchmark::DoNotOptimize(fit_l1(b, g.train));
}
BENCHMARK(BM_FitL1)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_RunICF(benchmark::State& st) {
  const auto g = bench::generate(cube(8, static_cast<std::size_t>(st.range(0)), true));
  const auto b = make_basis(8, 2, true);
  const Classifier h = threshold_round(fit_l1(b, g.train).polynomial, g.train);
  ICFConfig cfg;
  cfg.slack_r = 2.0;
  cfg.beta = variance_bound(1.0, 2);
  cfg.eps = 0.05;
  cfg.degree = 2;
  cfg.multilinear = true;
  for (auto _ : st) {
    benchmark::DoNotOptimize(run_icf({h, Classifier::complement_of(h)}, g.train.unlabeled(), g.test.unlabeled(), cfg));
  }
}
BENCHMARK(BM_RunICF)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_SelectorEval(benchmark::State& st) {
  const auto scn = cube(8, 2000, true);
  const auto g = bench::generate(scn);
  const auto b = make_basis(8, 2, true);
  const Classifier h = threshold_round(fit_l1(b, g.train).polynomial, g.train);
  ICFConfig cfg;
  cfg.slack_r = 2.0;
  cfg.beta = variance_bound(1.0, 2);
  cfg.eps = 0.02;
  cfg.degree = 2;
  cfg.multilinear = true;
  const auto run = run_icf({h, Classifier::complement_of(h)}, g.train.unlabeled(), g.test.unlabeled(), cfg);
  const auto eval = bench::fresh(scn, bench::Side::test, 1000, 0).sample;
  for (auto _ : st) benchmark::DoNotOptimize(rejection_rate(run.selector, eval));
  st.counters["rules"] = static_cast<double>(run.selector.rules().size());
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * eval.size()));
}
BENCHMARK(BM_SelectorEval)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
