#include "pqtds/icf.hpp"

#include "pqtds/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace pqtds {

struct SelectorBuilder {
  static void add_rule(Selector& s, FilterRule r) { s.rules_.push_back(std::move(r)); }
};

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::span<const double> row_span(const RowMatrix& m, std::size_t i) {
  const auto k = static_cast<std::size_t>(m.cols());
  return {m.data() + i * k, k};
}

}  // namespace

void ICFConfig::validate() const {
  if (degree < 0) throw InvalidArgument("ICFConfig: degree must be >= 0");
  if (!(slack_r > 1.0) || !std::isfinite(slack_r)) throw InvalidArgument("ICFConfig: R must exceed 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("ICFConfig: beta must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("ICFConfig: eps must lie in (0,1)");
  if (!(hyper_a >= 1.0)) throw InvalidArgument("ICFConfig: hypercontractivity constant must be >= 1");
  if (!(solver.opt_tol > 0.0) || !(solver.feas_tol > 0.0)) {
    throw InvalidArgument("ICFConfig: solver tolerances must be positive");
  }
}

Schedule compute_schedule(const ICFConfig& cfg, int dim) {
  cfg.validate();
  if (dim < 1) throw InvalidArgument("compute_schedule: dimension must be >= 1");
  const double growth = std::pow(static_cast<double>(dim) + 1.0, cfg.degree);
  Schedule s;
  s.bound = 2.0 * std::sqrt(2.0 * cfg.slack_r * growth * cfg.beta / cfg.eps);
  s.delta = cfg.eps * cfg.eps / (s.bound * (2.0 * cfg.slack_r + cfg.eps));
  if (!std::isfinite(s.bound) || !std::isfinite(s.delta) || s.delta <= 0.0) {
    throw InvalidArgument("compute_schedule: parameters overflow the schedule");
  }
  return s;
}

double rule_statistic(int f_value, const Polynomial& p, std::span<const double> features) {
  if (f_value == 0) return 0.0;
  return std::abs(p.from_features(features));
}

double find_tau(std::span<const double> current_values, std::span<const double> reference_values,
                double slack_r, double delta, std::size_t n_target, double bound) {
  if (n_target == 0) throw InvalidArgument("find_tau: target size must be positive");
  if (reference_values.empty()) throw InvalidArgument("find_tau: empty reference sample");
  std::vector<double> cur(current_values.begin(), current_values.end());
  std::vector<double> ref(reference_values.begin(), reference_values.end());
  std::sort(cur.begin(), cur.end());
  std::sort(ref.begin(), ref.end());

  std::vector<double> candidates{0.0};
  candidates.insert(candidates.end(), cur.begin(), cur.end());
  candidates.insert(candidates.end(), ref.begin(), ref.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const double nt = static_cast<double>(n_target);
  const double nr = static_cast<double>(ref.size());
  for (double tau : candidates) {
    if (tau < 0.0) continue;
    if (tau > bound) break;
    const auto above_cur = static_cast<double>(
        cur.end() - std::upper_bound(cur.begin(), cur.end(), tau));
    const auto above_ref = static_cast<double>(
        ref.end() - std::upper_bound(ref.begin(), ref.end(), tau));
    if (above_cur / nt >= slack_r * (above_ref / nr) + delta) return tau;
  }
  throw NoValidThreshold("no threshold in [0, B] satisfies the filtering condition");
}

Selector::Selector(double bound, std::vector<Classifier> family,
                   std::vector<ConstraintSet> constraints, std::vector<FilterRule> rules,
                   SolverOptions solver)
    : bound_(bound),
      family_(std::move(family)),
      constraints_(std::move(constraints)),
      rules_(std::move(rules)),
      solver_(solver),
      cache_(std::make_shared<Cache>()) {
  if (family_.size() != constraints_.size()) {
    throw InvalidArgument("Selector: one constraint set per classifier required");
  }
  if (family_.empty()) throw InvalidArgument("Selector: empty classifier family");
  for (const auto& r : rules_) {
    if (r.classifier_index >= family_.size()) throw InvalidArgument("Selector: rule classifier index out of range");
  }
}

std::size_t Selector::dim() const {
  return static_cast<std::size_t>(constraints_.front().basis->dimension());
}

bool Selector::exceeds_cached(std::span<const double> x, std::size_t k) const {
  std::string key(x.size_bytes() + sizeof(k), '\0');
  std::memcpy(key.data(), x.data(), x.size_bytes());
  std::memcpy(key.data() + x.size_bytes(), &k, sizeof(k));
  {
    std::lock_guard<std::mutex> lock(cache_->mu);
    if (auto it = cache_->exceeds.find(key); it != cache_->exceeds.end()) return it->second;
  }
  const bool v = exceeds_bound_at_point(x, constraints_[k], bound_, solver_);
  std::lock_guard<std::mutex> lock(cache_->mu);
  cache_->exceeds.emplace(std::move(key), v);
  return v;
}

bool Selector::bounded(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionMismatch("Selector: point dimension mismatch");
  for (std::size_t k = 0; k < family_.size(); ++k) {
    if (family_[k](x) == 1 && exceeds_cached(x, k)) return false;
  }
  return true;
}

int Selector::operator()(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionMismatch("Selector: point dimension mismatch");
  if (!rules_.empty()) {
    const Vector m = constraints_.front().basis->features(x);
    const std::span<const double> feats{m.data(), static_cast<std::size_t>(m.size())};
    for (const auto& r : rules_) {
      if (rule_statistic(family_[r.classifier_index](x), r.witness, feats) > r.tau) return 0;
    }
  }
  return bounded(x) ? 1 : 0;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::empty_after_bounding:
      return "empty_after_bounding";
    case Termination::terminated_inconsistent:
      return "terminated_inconsistent";
    case Termination::iteration_cap:
      return "iteration_cap";
  }
  return "unknown";
}

std::size_t RunRecord::final_survivors() const {
  return iterations.empty() ? initial_survivors : iterations.back().surviving;
}

ICFResult run_icf(const std::vector<Classifier>& family, const Sample& reference,
                  const Sample& target, const ICFConfig& cfg) {
  cfg.validate();
  if (family.empty()) throw InvalidArgument("run_icf: empty classifier family");
  if (reference.empty()) throw EmptySample("run_icf: empty reference sample");
  if (target.empty()) throw EmptySample("run_icf: empty target sample");
  if (reference.dim() != target.dim()) throw DimensionMismatch("run_icf: sample dimensions differ");

  const int dim = reference.dim();
  const Schedule sched = compute_schedule(cfg, dim);
  const BasisPtr basis = make_basis(dim, cfg.degree, cfg.multilinear);
  const std::size_t k_count = family.size();
  const std::size_t n_ref = reference.size();
  const std::size_t n_target = target.size();

  RunRecord rec;
  rec.reference_size = n_ref;
  rec.target_size = n_target;
  rec.bound = sched.bound;
  rec.delta = sched.delta;
  const double inv_delta = std::floor(1.0 / sched.delta);
  const auto natural_cap = inv_delta >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max()
                                               : static_cast<std::uint64_t>(inv_delta) + 1;
  rec.iteration_cap = cfg.max_iterations.value_or(natural_cap);

  auto t0 = Clock::now();
  const RowMatrix ref_feats = feature_matrix(*basis, reference);
  const RowMatrix tgt_feats = feature_matrix(*basis, target);
  std::vector<std::vector<std::uint8_t>> f_ref(k_count, std::vector<std::uint8_t>(n_ref));
  std::vector<std::vector<std::uint8_t>> f_tgt(k_count, std::vector<std::uint8_t>(n_target));
  std::vector<ConstraintSet> constraints;
  constraints.reserve(k_count);
  const double abs_bound = 2.0 * cfg.eps / (2.0 * cfg.slack_r + cfg.eps);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t i = 0; i < n_ref; ++i) f_ref[k][i] = static_cast<std::uint8_t>(family[k](reference.point(i)));
    for (std::size_t i = 0; i < n_target; ++i) f_tgt[k][i] = static_cast<std::uint8_t>(family[k](target.point(i)));
    constraints.push_back(build_constraint_set_from_rows(basis, ref_feats, f_ref[k],
                                                         1.0 / static_cast<double>(n_ref),
                                                         2.0 * cfg.beta, abs_bound));
    rec.projector_rank.push_back(constraints.back().rank);
    rec.fingerprints.push_back(constraints.back().fingerprint);
    if (constraints.back().rank < static_cast<Eigen::Index>(basis->size())) rec.projector_restricted = true;
  }
  rec.seconds_constraints = seconds_since(t0);

  Selector selector(sched.bound, family, constraints, {}, cfg.solver);

  t0 = Clock::now();
  std::vector<std::size_t> current;
  current.reserve(n_target);
  for (std::size_t i = 0; i < n_target; ++i) {
    if (selector.bounded(target.point(i))) current.push_back(i);
  }
  rec.initial_survivors = current.size();
  rec.removed_by_bound = n_target - current.size();
  rec.seconds_bounding = seconds_since(t0);

  t0 = Clock::now();
  const double inv_nt = 1.0 / static_cast<double>(n_target);
  std::vector<double> cur_values;
  std::vector<double> ref_values(n_ref);
  for (;;) {
    WitnessSolution best;
    bool have = false;
    int steps = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      Vector objective = Vector::Zero(static_cast<Eigen::Index>(basis->size()));
      for (std::size_t i : current) {
        if (f_tgt[k][i]) objective += tgt_feats.row(static_cast<Eigen::Index>(i)).transpose();
      }
      objective *= inv_nt;
      auto sol = solve_witness(objective, constraints[k], cfg.solver);
      steps += sol.newton_steps;
      if (!sol.ok()) {
        std::ostringstream msg;
        msg << "run_icf: witness solve for classifier " << k << " failed (" << to_string(sol.status)
            << ") at iteration " << rec.iterations.size() + 1;
        throw SolverFailure(msg.str());
      }
      sol.classifier_index = k;
      if (!have || sol.value > best.value) {
        best = std::move(sol);
        have = true;
      }
    }
    rec.final_mu = best.value;
    rec.final_classifier = best.classifier_index;
    if (best.value <= cfg.eps) {
      rec.termination = current.empty() ? Termination::empty_after_bounding : Termination::converged;
      break;
    }
    if (rec.iterations.size() >= rec.iteration_cap) {
      rec.termination = Termination::iteration_cap;
      break;
    }

    const std::size_t k = best.classifier_index;
    const Polynomial witness(basis, best.coefficients);
    cur_values.resize(current.size());
    for (std::size_t j = 0; j < current.size(); ++j) {
      const std::size_t i = current[j];
      cur_values[j] = rule_statistic(f_tgt[k][i], witness, row_span(tgt_feats, i));
    }
    for (std::size_t i = 0; i < n_ref; ++i) {
      ref_values[i] = rule_statistic(f_ref[k][i], witness, row_span(ref_feats, i));
    }

    double tau = 0.0;
    try {
      tau = find_tau(cur_values, ref_values, cfg.slack_r, sched.delta, n_target, sched.bound);
    } catch (const NoValidThreshold& e) {
      std::ostringstream msg;
      msg << "iteration " << rec.iterations.size() + 1 << ": mu=" << best.value << " > eps=" << cfg.eps
          << " but " << e.what();
      if (cfg.strict_tau) throw NoValidThreshold(msg.str());
      rec.termination = Termination::terminated_inconsistent;
      rec.termination_detail = msg.str();
      break;
    }

    std::vector<std::size_t> next;
    next.reserve(current.size());
    for (std::size_t j = 0; j < current.size(); ++j) {
      if (!(cur_values[j] > tau)) next.push_back(current[j]);
    }
    IterationRecord it;
    it.mu = best.value;
    it.classifier_index = k;
    it.tau = tau;
    it.removed = current.size() - next.size();
    it.surviving = next.size();
    it.newton_steps = steps;
    rec.iterations.push_back(it);
    SelectorBuilder::add_rule(selector, FilterRule{k, witness, tau});
    current = std::move(next);
  }
  rec.seconds_loop = seconds_since(t0);

  std::vector<std::uint8_t> survived(n_target, 0);
  for (std::size_t i : current) survived[i] = 1;
  return ICFResult{std::move(selector), std::move(rec), std::move(survived)};
}

}  // namespace pqtds
