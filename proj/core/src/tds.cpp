#include "pqtds/tds.hpp"

#include "pqtds/errors.hpp"
#include "pqtds/l1reg.hpp"
#include "pqtds/pq.hpp"

#include <algorithm>
#include <cmath>

namespace pqtds {

namespace {

constexpr std::uint64_t kHoldoutStream = 1;

}  // namespace

const char* to_string(Decision d) {
  return d == Decision::accept ? "ACCEPT" : "REJECT";
}

void TDSConfig::validate() const {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("TDSConfig: eps must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("TDSConfig: delta must lie in (0,1)");
  if (!(theta >= 0.0 && theta < 1.0)) throw InvalidArgument("TDSConfig: theta must lie in [0,1)");
  if (slack_r && !(*slack_r > 1.0 && std::isfinite(*slack_r))) {
    throw InvalidArgument("TDSConfig: R must exceed 1");
  }
  if (degree < 0) throw InvalidArgument("TDSConfig: degree must be >= 0");
  if (!(hyper_a >= 1.0)) throw InvalidArgument("TDSConfig: hypercontractivity constant must be >= 1");
}

double TDSConfig::resolved_r() const {
  return slack_r.value_or(default_R(theta, eps));
}

double default_R(double theta, double eps) {
  if (!(theta >= 0.0 && theta < 1.0)) throw InvalidArgument("default_R: theta must lie in [0,1)");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("default_R: eps must lie in (0,1)");
  return 1.0 + std::max(std::sqrt(theta / 2.0), eps / 9.0);
}

double accept_threshold(double slack_r, double theta, double eps) {
  if (!(slack_r > 1.0)) throw InvalidArgument("accept_threshold: R must exceed 1");
  return slack_r * theta / (slack_r - 1.0) + eps / 4.0;
}

double tds_filter_eps(double slack_r, double eps) {
  if (!(slack_r > 1.0)) throw InvalidArgument("tds_filter_eps: R must exceed 1");
  return (slack_r - 1.0) * eps / (128.0 * slack_r * slack_r);
}

std::size_t holdout_size(double eps, double delta) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("holdout_size: eps must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("holdout_size: delta must lie in (0,1)");
  const double n = std::ceil(std::log(1.0 / delta) / (eps * eps));
  return std::max<std::size_t>(static_cast<std::size_t>(n), 100);
}

TDSVerdict tds_learn(const Sample& train, const Sample& test_points, const TDSConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw EmptySample("tds_learn: empty training sample");
  if (!train.labeled()) throw InvalidArgument("tds_learn: training sample must be labeled");
  if (test_points.empty()) throw EmptySample("tds_learn: empty test sample");
  if (train.dim() != test_points.dim()) throw DimensionMismatch("tds_learn: sample dimensions differ");

  const double r = cfg.resolved_r();
  const std::size_t n_hold = holdout_size(cfg.eps, cfg.delta);
  if (test_points.size() <= n_hold) {
    throw InvalidArgument("tds_learn: need more than " + std::to_string(n_hold) +
                          " test points (holdout plus filtering target), got " +
                          std::to_string(test_points.size()));
  }

  const auto perm = seeded_permutation(test_points.size(), derive_seed(cfg.seed, kHoldoutStream));
  std::vector<std::size_t> hold_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> target_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_hold), perm.end());
  const Sample holdout = test_points.subset(hold_idx).unlabeled();
  const Sample target = test_points.subset(target_idx).unlabeled();

  const auto split = split_training(train, cfg.seed);
  const BasisPtr basis = make_basis(train.dim(), cfg.degree, cfg.multilinear);
  const L1Fit fit = fit_l1(basis, split.regression);
  Classifier f_hat = threshold_round(fit.polynomial, split.regression);

  ICFConfig icf;
  icf.degree = cfg.degree;
  icf.slack_r = r;
  icf.beta = variance_bound(cfg.hyper_a, cfg.degree);
  icf.eps = tds_filter_eps(r, cfg.eps);
  icf.hyper_a = cfg.hyper_a;
  icf.multilinear = cfg.multilinear;
  icf.solver = cfg.solver;
  icf.strict_tau = cfg.strict_tau;

  std::vector<Classifier> family{f_hat, Classifier::complement_of(f_hat)};
  auto run = run_icf(family, split.reference, target, icf);

  const double rejected = rejection_rate(run.selector, holdout);
  const double threshold = accept_threshold(r, cfg.theta, cfg.eps);
  const Decision decision = rejected >= threshold ? Decision::reject : Decision::accept;

  return TDSVerdict{decision,
                    decision == Decision::accept ? std::optional<Classifier>(f_hat) : std::nullopt,
                    rejected,
                    threshold,
                    r,
                    icf.eps,
                    icf.beta,
                    n_hold,
                    std::move(run.selector),
                    std::move(run.record),
                    icf,
                    fit.objective,
                    empirical_error(f_hat, split.regression),
                    f_hat};
}

}  // namespace pqtds
