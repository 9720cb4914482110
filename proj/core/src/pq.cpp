#include "pqtds/pq.hpp"

#include "pqtds/errors.hpp"
#include "pqtds/l1reg.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace pqtds {

void PQConfig::validate() const {
  auto unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!unit(eps)) throw InvalidArgument("PQConfig: eps must lie in (0,1)");
  if (!unit(delta)) throw InvalidArgument("PQConfig: delta must lie in (0,1)");
  if (!unit(eta)) throw InvalidArgument("PQConfig: eta must lie in (0,1)");
  if (degree < 0) throw InvalidArgument("PQConfig: degree must be >= 0");
  if (!(hyper_a >= 1.0)) throw InvalidArgument("PQConfig: hypercontractivity constant must be >= 1");
}

double variance_bound(double hyper_a, int degree) {
  return 4.0 * std::pow(2.0 * hyper_a, 2.0 * degree);
}

PQHyperparameters pq_hyperparameters(const PQConfig& cfg) {
  cfg.validate();
  PQHyperparameters h;
  h.slack_r = 1.0 / cfg.eta + cfg.eps / 96.0;
  h.beta = variance_bound(cfg.hyper_a, cfg.degree);
  h.eps_icf = cfg.eps * cfg.eta / 96.0;
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    // Unbiased draw from [0, i) by rejection.
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
      v = rng();
    } while (v >= limit);
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(v % bound)]);
  }
  return idx;
}

TrainingSplit split_training(const Sample& train, std::uint64_t seed) {
  if (train.size() < 2) throw InvalidArgument("split_training: need at least two training points");
  const auto perm = seeded_permutation(train.size(), seed);
  const std::size_t n_reg = (train.size() + 1) / 2;
  std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_reg));
  std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(n_reg), perm.end());
  TrainingSplit out{train.subset(a), train.subset(b).unlabeled()};
  out.regression.provenance = Provenance::train;
  out.reference.provenance = Provenance::train;
  return out;
}

PQOutput pq_learn(const Sample& train, const Sample& test_points, const PQConfig& cfg) {
  const PQHyperparameters hyper = pq_hyperparameters(cfg);
  if (train.empty()) throw EmptySample("pq_learn: empty training sample");
  if (test_points.empty()) throw EmptySample("pq_learn: empty test sample");
  if (!train.labeled()) throw InvalidArgument("pq_learn: training sample must be labeled");
  if (train.dim() != test_points.dim()) throw DimensionMismatch("pq_learn: sample dimensions differ");

  const auto split = split_training(train, cfg.seed);
  const BasisPtr basis = make_basis(train.dim(), cfg.degree, cfg.multilinear);
  const L1Fit fit = fit_l1(basis, split.regression);
  Classifier f_hat = threshold_round(fit.polynomial, split.regression);

  ICFConfig icf;
  icf.degree = cfg.degree;
  icf.slack_r = hyper.slack_r;
  icf.beta = hyper.beta;
  icf.eps = hyper.eps_icf;
  icf.hyper_a = cfg.hyper_a;
  icf.multilinear = cfg.multilinear;
  icf.solver = cfg.solver;
  icf.strict_tau = cfg.strict_tau;

  std::vector<Classifier> family{f_hat, Classifier::complement_of(f_hat)};
  auto run = run_icf(family, split.reference, test_points.unlabeled(), icf);

  return PQOutput{std::move(f_hat),
                  std::move(run.selector),
                  std::move(run.record),
                  hyper,
                  icf,
                  fit.objective,
                  empirical_error(family.front(), split.regression),
                  split.regression.size(),
                  split.reference.size()};
}

}  // namespace pqtds
