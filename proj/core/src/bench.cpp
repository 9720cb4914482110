#include "pqtds/bench.hpp"

#include "pqtds/errors.hpp"
#include "pqtds/l1reg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace pqtds::bench {

namespace {

constexpr std::uint64_t kTrainStream = 100;
constexpr std::uint64_t kTestStream = 101;
constexpr std::uint64_t kFreshTrainStream = 200;
constexpr std::uint64_t kFreshTestStream = 201;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  int sign() { return (gen_() >> 63) ? -1 : 1; }
  bool bernoulli(double p) { return p > 0.0 && uniform() < p; }

  // Box-Muller; the spare value is kept so the stream is a fixed function of the seed.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

bool literal_holds(int lit, std::span<const double> x) {
  const double v = x[static_cast<std::size_t>(std::abs(lit) - 1)];
  return lit > 0 ? v > 0.0 : v < 0.0;
}

bool term_holds(const std::vector<int>& term, std::span<const double> x) {
  return std::all_of(term.begin(), term.end(), [&](int lit) { return literal_holds(lit, x); });
}

std::string format_literals(const std::vector<int>& lits) {
  if (lits.empty()) return "TRUE";
  std::string out;
  for (std::size_t i = 0; i < lits.size(); ++i) {
    if (i) out += " & ";
    out += (lits[i] > 0 ? "x" : "!x") + std::to_string(std::abs(lits[i]));
  }
  return out;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_literals(const std::vector<int>& lits, int d, const char* what) {
  for (int l : lits) {
    if (l == 0 || std::abs(l) > d) {
      throw InvalidArgument(std::string(what) + ": literal " + std::to_string(l) + " out of range");
    }
  }
}

void validate_concept(const ConceptSpec& c, int d) {
  switch (c.kind) {
    case ConceptSpec::Kind::conjunction:
      check_literals(c.literals, d, "conjunction");
      break;
    case ConceptSpec::Kind::halfspace:
      if (static_cast<int>(c.weights.size()) != d) {
        throw InvalidArgument("halfspace: need one weight per coordinate");
      }
      break;
    case ConceptSpec::Kind::dnf:
      if (c.terms.empty()) throw InvalidArgument("dnf: need at least one term");
      for (const auto& t : c.terms) check_literals(t, d, "dnf");
      break;
    case ConceptSpec::Kind::ptf2:
      if (c.quad.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(d)) {
        throw InvalidArgument("ptf2: quad must have d*d entries");
      }
      if (!c.weights.empty() && static_cast<int>(c.weights.size()) != d) {
        throw InvalidArgument("ptf2: linear weights must be empty or have d entries");
      }
      break;
  }
}

void base_point(const Scenario& scn, Rng& rng, std::span<double> x) {
  const auto& m = scn.marginal;
  switch (m.kind) {
    case MarginalSpec::Kind::hypercube:
      for (double& v : x) v = rng.sign();
      break;
    case MarginalSpec::Kind::gaussian:
      for (double& v : x) v = rng.normal();
      break;
    case MarginalSpec::Kind::finite: {
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = m.weights.size() - 1;
      for (std::size_t i = 0; i < m.weights.size(); ++i) {
        acc += m.weights[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = m.support(static_cast<Eigen::Index>(pick), static_cast<Eigen::Index>(j));
      break;
    }
  }
}

void apply_pattern(const ShiftSpec& s, MarginalSpec::Kind kind, std::span<double> x) {
  for (const auto& [c, sign] : s.pattern) {
    double& v = x[static_cast<std::size_t>(c)];
    v = kind == MarginalSpec::Kind::gaussian ? sign * std::abs(v) : static_cast<double>(sign);
  }
}

void shifted_point(const Scenario& scn, Rng& rng, std::span<double> x) {
  const auto& s = scn.shift;
  switch (s.kind) {
    case ShiftSpec::Kind::none:
      base_point(scn, rng, x);
      break;
    case ShiftSpec::Kind::subcube:
      base_point(scn, rng, x);
      apply_pattern(s, scn.marginal.kind, x);
      break;
    case ShiftSpec::Kind::mixture:
      if (s.cloud == ShiftSpec::Cloud::scaled_cube) {
        for (double& v : x) v = s.scale * rng.sign();
      } else {
        for (std::size_t j = 0; j < x.size(); ++j) {
          x[j] = (s.center.empty() ? 0.0 : s.center[j]) + s.scale * rng.normal();
        }
      }
      break;
    case ShiftSpec::Kind::mean_shift:
      for (std::size_t j = 0; j < x.size(); ++j) x[j] = s.mean[j] + rng.normal();
      break;
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::string tok;
  std::istringstream in(text);
  while (in >> tok) {
    std::istringstream parts(tok);
    std::string piece;
    while (std::getline(parts, piece, ',')) {
      if (piece.empty()) continue;
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(piece, &used);
      } catch (const std::exception&) {
        throw FormatError("scenario: not a number: '" + piece + "'");
      }
      if (used != piece.size()) throw FormatError("scenario: not a number: '" + piece + "'");
      out.push_back(v);
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_list(text)) {
    if (v != std::floor(v)) throw FormatError("scenario: expected integers in '" + text + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string piece;
  std::istringstream in(text);
  while (std::getline(in, piece, sep)) out.push_back(piece);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("scenario: expected a boolean, got '" + v + "'");
}

double parse_number(const std::string& v) {
  const auto list = parse_list(v);
  if (list.size() != 1) throw FormatError("scenario: expected one number, got '" + v + "'");
  return list.front();
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw FormatError("scenario: expected a nonnegative integer, got '" + v + "'");
  }
  if (used != v.size() || v.front() == '-') {
    throw FormatError("scenario: expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

void set_concept_key(ConceptSpec& c, const std::string& key, const std::string& value) {
  if (key == "kind") {
    if (value == "conjunction") c.kind = ConceptSpec::Kind::conjunction;
    else if (value == "halfspace") c.kind = ConceptSpec::Kind::halfspace;
    else if (value == "dnf") c.kind = ConceptSpec::Kind::dnf;
    else if (value == "ptf2") c.kind = ConceptSpec::Kind::ptf2;
    else throw FormatError("scenario: unknown concept kind '" + value + "'");
  } else if (key == "literals") {
    c.literals = parse_int_list(value);
  } else if (key == "weights") {
    c.weights = parse_list(value);
  } else if (key == "bias") {
    c.bias = parse_number(value);
  } else if (key == "terms") {
    c.terms.clear();
    for (const auto& t : split(value, '|')) c.terms.push_back(parse_int_list(t));
  } else if (key == "quad") {
    c.quad = parse_list(value);
  } else {
    throw FormatError("scenario: unknown concept key '" + key + "'");
  }
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt17(v[i]);
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(v[i]);
  }
  return out;
}

void format_concept(std::ostringstream& out, const ConceptSpec& c) {
  static const char* kinds[] = {"conjunction", "halfspace", "dnf", "ptf2"};
  out << "kind = " << kinds[static_cast<int>(c.kind)] << "\n";
  if (!c.literals.empty()) out << "literals = " << join(c.literals) << "\n";
  if (!c.weights.empty()) out << "weights = " << join(c.weights) << "\n";
  if (c.bias != 0.0) out << "bias = " << fmt17(c.bias) << "\n";
  if (!c.terms.empty()) {
    out << "terms = ";
    for (std::size_t i = 0; i < c.terms.size(); ++i) out << (i ? " | " : "") << join(c.terms[i]);
    out << "\n";
  }
  if (!c.quad.empty()) out << "quad = " << join(c.quad) << "\n";
}

}  // namespace

int ConceptSpec::operator()(std::span<const double> x) const {
  switch (kind) {
    case Kind::conjunction:
      return term_holds(literals, x) ? 1 : 0;
    case Kind::halfspace: {
      double s = bias;
      for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * x[j];
      return s >= 0.0 ? 1 : 0;
    }
    case Kind::dnf:
      return std::any_of(terms.begin(), terms.end(),
                         [&](const std::vector<int>& t) { return term_holds(t, x); })
                 ? 1
                 : 0;
    case Kind::ptf2: {
      const std::size_t d = x.size();
      double s = bias;
      for (std::size_t i = 0; i < d; ++i) {
        if (!weights.empty()) s += weights[i] * x[i];
        for (std::size_t j = 0; j < d; ++j) s += quad[i * d + j] * x[i] * x[j];
      }
      return s >= 0.0 ? 1 : 0;
    }
  }
  return 0;
}

std::string ConceptSpec::describe() const {
  switch (kind) {
    case Kind::conjunction:
      return "conjunction(" + format_literals(literals) + ")";
    case Kind::halfspace:
      return "halfspace(w=[" + join(weights) + "], b=" + fmt17(bias) + ")";
    case Kind::dnf: {
      std::string out = "dnf(";
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out += " | ";
        out += format_literals(terms[i]);
      }
      return out + ")";
    }
    case Kind::ptf2:
      return "ptf2(b=" + fmt17(bias) + ")";
  }
  return "?";
}

void Scenario::validate() const {
  const int d = marginal.dim;
  if (d < 1) throw InvalidArgument("scenario: dim must be >= 1");
  if (n_train < 1 || n_test < 1) throw InvalidArgument("scenario: sample sizes must be >= 1");
  auto noise_ok = [](double v) { return v >= 0.0 && v < 0.5; };
  if (!noise_ok(noise_train) || !noise_ok(noise_test)) {
    throw InvalidArgument("scenario: noise rates must lie in [0, 1/2)");
  }
  if (marginal.kind == MarginalSpec::Kind::finite) {
    if (marginal.support.rows() == 0 || marginal.support.cols() != d) {
      throw InvalidArgument("scenario: finite support must be nonempty with d columns");
    }
    if (marginal.weights.size() != static_cast<std::size_t>(marginal.support.rows())) {
      throw InvalidArgument("scenario: one weight per support point required");
    }
    double total = 0.0;
    for (double w : marginal.weights) {
      if (!(w >= 0.0)) throw InvalidArgument("scenario: support weights must be nonnegative");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("scenario: support weights must sum to 1");
  }
  if (!(shift.weight >= 0.0 && shift.weight <= 1.0)) {
    throw InvalidArgument("scenario: shift weight must lie in [0,1]");
  }
  switch (shift.kind) {
    case ShiftSpec::Kind::none:
      break;
    case ShiftSpec::Kind::subcube:
      if (shift.pattern.empty()) throw InvalidArgument("scenario: subcube shift needs a pattern");
      for (const auto& [c, s] : shift.pattern) {
        if (c < 0 || c >= d || (s != 1 && s != -1)) {
          throw InvalidArgument("scenario: subcube pattern entry out of range");
        }
      }
      break;
    case ShiftSpec::Kind::mixture:
      if (!(shift.scale > 0.0)) throw InvalidArgument("scenario: cloud scale must be positive");
      if (!shift.center.empty() && static_cast<int>(shift.center.size()) != d) {
        throw InvalidArgument("scenario: cloud center must have d entries");
      }
      break;
    case ShiftSpec::Kind::mean_shift:
      if (marginal.kind != MarginalSpec::Kind::gaussian) {
        throw InvalidArgument("scenario: mean shift requires a gaussian marginal");
      }
      if (static_cast<int>(shift.mean.size()) != d) {
        throw InvalidArgument("scenario: mean shift vector must have d entries");
      }
      break;
  }
  validate_concept(concept_spec, d);
  if (test_concept) validate_concept(*test_concept, d);
}

Draw draw(const Scenario& scn, Side side, std::size_t n, std::uint64_t seed) {
  scn.validate();
  const int d = scn.dim();
  Rng rng(seed);
  Draw out;
  RowMatrix pts(static_cast<Eigen::Index>(n), d);
  std::vector<std::uint8_t> labels(n);
  out.from_shift.assign(n, 0);
  const bool shifted_side = side == Side::test && scn.shift.kind != ShiftSpec::Kind::none;
  const ConceptSpec& target = side == Side::test && scn.test_concept ? *scn.test_concept : scn.concept_spec;
  const double noise = side == Side::train ? scn.noise_train : scn.noise_test;
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(pts.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d));
    const bool from_shift = shifted_side && rng.bernoulli(scn.shift.weight);
    if (from_shift) {
      shifted_point(scn, rng, x);
    } else {
      base_point(scn, rng, x);
    }
    int y = target(x);
    if (from_shift && scn.shift.flip_labels) y = 1 - y;
    if (rng.bernoulli(noise)) y = 1 - y;
    labels[i] = static_cast<std::uint8_t>(y);
    out.from_shift[i] = from_shift ? 1 : 0;
  }
  out.sample = Sample(std::move(pts), std::move(labels),
                      side == Side::train ? Provenance::train : Provenance::test, seed);
  return out;
}

Generated generate(const Scenario& scn) {
  auto tr = draw(scn, Side::train, scn.n_train, derive_seed(scn.seed, kTrainStream));
  auto te = draw(scn, Side::test, scn.n_test, derive_seed(scn.seed, kTestStream));
  return Generated{std::move(tr.sample), std::move(te.sample), std::move(te.from_shift)};
}

Draw fresh(const Scenario& scn, Side side, std::size_t n, std::uint64_t stream) {
  const std::uint64_t base =
      derive_seed(scn.seed, side == Side::train ? kFreshTrainStream : kFreshTestStream);
  return draw(scn, side, n, derive_seed(base, stream));
}

std::optional<OracleDistributions> oracle_distributions(const Scenario& scn) {
  scn.validate();
  const int d = scn.dim();
  oracle::FiniteDistribution base;
  switch (scn.marginal.kind) {
    case MarginalSpec::Kind::hypercube:
      if (d > oracle::kMaxEnumerationDim) return std::nullopt;
      base = oracle::FiniteDistribution::uniform_hypercube(d);
      break;
    case MarginalSpec::Kind::finite:
      base.support = scn.marginal.support;
      base.weights = scn.marginal.weights;
      break;
    case MarginalSpec::Kind::gaussian:
      return std::nullopt;
  }

  oracle::FiniteDistribution shifted;
  switch (scn.shift.kind) {
    case ShiftSpec::Kind::none:
      break;
    case ShiftSpec::Kind::subcube:
      shifted = base;
      for (std::size_t i = 0; i < shifted.size(); ++i) {
        std::span<double> x(shifted.support.data() + i * static_cast<std::size_t>(d),
                            static_cast<std::size_t>(d));
        apply_pattern(scn.shift, scn.marginal.kind, x);
      }
      break;
    case ShiftSpec::Kind::mixture:
      if (scn.shift.cloud != ShiftSpec::Cloud::scaled_cube || d > oracle::kMaxEnumerationDim) {
        return std::nullopt;
      }
      shifted = oracle::FiniteDistribution::uniform_hypercube(d);
      shifted.support *= scn.shift.scale;
      break;
    case ShiftSpec::Kind::mean_shift:
      return std::nullopt;
  }

  const ConceptSpec& test_target = scn.test_concept ? *scn.test_concept : scn.concept_spec;
  auto train_fn = [&](std::span<const double> x) { return scn.concept_spec(x); };
  auto test_fn = [&](std::span<const double> x) { return test_target(x); };
  auto flipped_fn = [&](std::span<const double> x) {
    const int y = test_target(x);
    return scn.shift.flip_labels ? 1 - y : y;
  };

  OracleDistributions out;
  out.train = base.labeled_by(train_fn, scn.noise_train);
  if (scn.shift.kind == ShiftSpec::Kind::none || scn.shift.weight == 0.0) {
    out.test = base.labeled_by(test_fn, scn.noise_test);
  } else {
    out.test = oracle::FiniteDistribution::mixture(base.labeled_by(test_fn, scn.noise_test),
                                                   shifted.labeled_by(flipped_fn, scn.noise_test),
                                                   scn.shift.weight);
  }
  return out;
}

ConjunctionClass::ConjunctionClass(int d, int max_literals) {
  if (d < 1 || max_literals < 0) throw InvalidArgument("ConjunctionClass: bad parameters");
  max_literals = std::min(max_literals, d);
  // Terms of increasing size; within a size, variables ascending, then signs.
  std::vector<int> vars;
  auto extend = [&](auto&& self, int start, int remaining) -> void {
    if (remaining == 0) {
      const std::size_t k = vars.size();
      for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
        std::vector<int> term(k);
        for (std::size_t j = 0; j < k; ++j) term[j] = (mask >> j) & 1u ? -vars[j] : vars[j];
        terms_.push_back(std::move(term));
      }
      return;
    }
    for (int v = start; v <= d; ++v) {
      vars.push_back(v);
      self(self, v + 1, remaining - 1);
      vars.pop_back();
    }
  };
  for (int k = 0; k <= max_literals; ++k) extend(extend, 1, k);
}

int ConjunctionClass::label(std::size_t idx, std::span<const double> x) const {
  if (idx == terms_.size()) return 0;
  return term_holds(terms_.at(idx), x) ? 1 : 0;
}

std::string ConjunctionClass::describe(std::size_t idx) const {
  if (idx == terms_.size()) return "FALSE";
  return format_literals(terms_.at(idx));
}

HalfspaceClass::HalfspaceClass(int d, int w_max, int bias_max)
    : d_(d), w_max_(w_max), bias_max_(bias_max) {
  if (d < 1 || w_max < 0 || bias_max < 0) throw InvalidArgument("HalfspaceClass: bad parameters");
  double count = 2.0 * bias_max + 1.0;
  for (int j = 0; j < d; ++j) count *= 2.0 * w_max + 1.0;
  if (count > 1e6) throw InvalidArgument("HalfspaceClass: more than 10^6 concepts");
  count_ = static_cast<std::size_t>(count);
}

void HalfspaceClass::decode(std::size_t idx, std::vector<int>& w, int& b) const {
  const auto base = static_cast<std::size_t>(2 * w_max_ + 1);
  w.resize(static_cast<std::size_t>(d_));
  for (int j = 0; j < d_; ++j) {
    w[static_cast<std::size_t>(j)] = static_cast<int>(idx % base) - w_max_;
    idx /= base;
  }
  b = static_cast<int>(idx) - bias_max_;
}

int HalfspaceClass::label(std::size_t idx, std::span<const double> x) const {
  std::vector<int> w;
  int b = 0;
  decode(idx, w, b);
  double s = b;
  for (int j = 0; j < d_; ++j) s += w[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
  return s >= 0.0 ? 1 : 0;
}

std::string HalfspaceClass::describe(std::size_t idx) const {
  std::vector<int> w;
  int b = 0;
  decode(idx, w, b);
  return "1{[" + join(w) + "].x + " + std::to_string(b) + " >= 0}";
}

std::unique_ptr<oracle::ConceptClass> concept_class_for(const Scenario& scn) {
  const int d = scn.dim();
  const ConceptSpec& c = scn.concept_spec;
  if (scn.test_concept && scn.test_concept->kind != c.kind) return nullptr;
  switch (c.kind) {
    case ConceptSpec::Kind::conjunction: {
      std::size_t k = c.literals.size();
      if (scn.test_concept) k = std::max(k, scn.test_concept->literals.size());
      return std::make_unique<ConjunctionClass>(d, static_cast<int>(std::max<std::size_t>(3, k)));
    }
    case ConceptSpec::Kind::halfspace: {
      int w_max = 2;
      int b_max = 2;
      for (double w : c.weights) w_max = std::max(w_max, static_cast<int>(std::ceil(std::abs(w))));
      b_max = std::max(b_max, static_cast<int>(std::ceil(std::abs(c.bias))));
      double count = 2.0 * b_max + 1.0;
      for (int j = 0; j < d; ++j) count *= 2.0 * w_max + 1.0;
      if (count > 1e6) return nullptr;
      return std::make_unique<HalfspaceClass>(d, w_max, b_max);
    }
    case ConceptSpec::Kind::dnf:
    case ConceptSpec::Kind::ptf2:
      return nullptr;
  }
  return nullptr;
}

std::optional<OracleLambda> oracle_lambda(const Scenario& scn) {
  const auto dists = oracle_distributions(scn);
  if (!dists) return std::nullopt;
  const auto cls = concept_class_for(scn);
  if (!cls) return std::nullopt;
  const auto r = oracle::exact_lambda(*cls, dists->train, dists->test);
  return OracleLambda{r.lambda, r.lambda_train, r.lambda_test, r.opt_train};
}

DegreeRecommendation recommend_degree(const std::string& tag, double eps,
                                      const std::map<std::string, double>& params) {
  if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("recommend_degree: eps must lie in (0,1]");
  auto param = [&](const char* key) {
    const auto it = params.find(key);
    if (it == params.end()) {
      throw InvalidArgument("recommend_degree: class '" + tag + "' needs parameter '" + key + "'");
    }
    if (!(it->second >= 1.0)) {
      throw InvalidArgument(std::string("recommend_degree: parameter '") + key + "' must be >= 1");
    }
    return it->second;
  };

  double value = 0.0;
  std::string formula;
  if (tag == "ac0" || tag == "dnf") {
    const double s = param("size");
    const double t = tag == "dnf" ? 2.0 : param("depth");
    value = std::pow(std::log(std::max(s, 2.0)), t) * std::log(1.0 / eps);
    formula = "(log s)^t * log(1/eps)";
  } else if (tag == "dt_halfspaces" || tag == "halfspace") {
    const double t = tag == "halfspace" ? 1.0 : param("depth");
    const double s = tag == "halfspace" ? 1.0 : param("size");
    value = std::pow(t, 4) * s * s / (eps * eps);
    formula = "t^4 s^2 / eps^2";
  } else if (tag == "ptf2_gaussian") {
    value = std::pow(eps, -8.0);
    formula = "eps^-8";
  } else if (tag == "ptf2_hypercube") {
    value = std::pow(eps, -9.0);
    formula = "eps^-9";
  } else if (tag == "ptf") {
    const double k = param("k");
    value = std::pow(eps, -4.0 * k * std::pow(7.0, k));
    formula = "eps^(-4k 7^k)";
  } else if (tag == "k_halfspaces") {
    const double k = param("k");
    const double inner = std::max(std::log(k) / eps, std::numbers::e);
    value = std::exp(std::pow(std::log(inner), k) / std::pow(eps, 4));
    formula = "exp((log(max(log(k)/eps, e)))^k / eps^4)";
  } else {
    throw InvalidArgument("recommend_degree: unknown class '" + tag + "'");
  }

  DegreeRecommendation rec;
  rec.formula = formula;
  const double cap = static_cast<double>(std::numeric_limits<int>::max());
  if (!std::isfinite(value) || value >= cap) {
    rec.degree = std::numeric_limits<int>::max();
    rec.formula += " (saturated)";
  } else {
    // Round away representation noise such as 1/0.5^2 = 4.000000000000001.
    const double rounded = std::ceil(value - 1e-9 * std::max(1.0, value));
    rec.degree = std::max(1, static_cast<int>(rounded));
  }
  return rec;
}

MetricRecord evaluate_run(const PQOutput& out, const PQConfig& cfg, const Sample& labeled_test,
                          const Sample& fresh_train, const std::optional<OracleLambda>& lambda) {
  MetricRecord m;
  m.decision = "PQ";
  m.selective_error = selective_error(out.classifier, out.selector, labeled_test);
  m.test_error = empirical_error(out.classifier, labeled_test);
  m.rejection_test = rejection_rate(out.selector, labeled_test);
  if (!fresh_train.empty()) m.rejection_train = rejection_rate(out.selector, fresh_train);
  m.lambda = lambda;
  if (lambda) {
    m.bound = lambda->lambda_test + (lambda->lambda_train + lambda->opt_train) / cfg.eta + cfg.eps;
    m.slack = *m.bound - *m.selective_error;
  }
  return m;
}

MetricRecord evaluate_run(const TDSVerdict& v, const TDSConfig& cfg, const Sample& labeled_test,
                          const std::optional<OracleLambda>& lambda) {
  MetricRecord m;
  m.decision = to_string(v.decision);
  if (v.decision == Decision::reject) return m;
  m.test_error = empirical_error(*v.classifier, labeled_test);
  m.rejection_test = rejection_rate(v.selector, labeled_test);
  m.lambda = lambda;
  if (lambda) {
    const double r = v.slack_r;
    m.bound = lambda->lambda_test + r * (lambda->lambda_train + lambda->opt_train) +
              r * cfg.theta / (r - 1.0) + cfg.eps;
    m.slack = *m.bound - *m.test_error;
  }
  return m;
}

Scenario parse_scenario(const std::string& text) {
  Scenario scn;
  std::string section = "scenario";
  bool have_test_concept = false;
  ConceptSpec test_concept;
  std::vector<double> support_flat;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError("scenario line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "scenario" && section != "marginal" && section != "shift" && section != "concept" &&
          section != "test_concept") {
        throw FormatError("scenario line " + std::to_string(line_no) + ": unknown section '" + section + "'");
      }
      if (section == "test_concept") have_test_concept = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("scenario line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (section == "scenario") {
        if (key == "name") scn.name = value;
        else if (key == "seed") scn.seed = parse_u64(value);
        else if (key == "n_train") scn.n_train = parse_u64(value);
        else if (key == "n_test") scn.n_test = parse_u64(value);
        else if (key == "noise_train") scn.noise_train = parse_number(value);
        else if (key == "noise_test") scn.noise_test = parse_number(value);
        else throw FormatError("unknown key '" + key + "'");
      } else if (section == "marginal") {
        if (key == "kind") {
          if (value == "hypercube") scn.marginal.kind = MarginalSpec::Kind::hypercube;
          else if (value == "gaussian") scn.marginal.kind = MarginalSpec::Kind::gaussian;
          else if (value == "finite") scn.marginal.kind = MarginalSpec::Kind::finite;
          else throw FormatError("unknown marginal kind '" + value + "'");
        } else if (key == "dim") {
          scn.marginal.dim = static_cast<int>(parse_u64(value));
        } else if (key == "support") {
          support_flat.clear();
          for (const auto& row : split(value, ';')) {
            const auto vals = parse_list(row);
            support_flat.insert(support_flat.end(), vals.begin(), vals.end());
          }
        } else if (key == "weights") {
          scn.marginal.weights = parse_list(value);
        } else {
          throw FormatError("unknown key '" + key + "'");
        }
      } else if (section == "shift") {
        auto& s = scn.shift;
        if (key == "kind") {
          if (value == "none") s.kind = ShiftSpec::Kind::none;
          else if (value == "subcube") s.kind = ShiftSpec::Kind::subcube;
          else if (value == "mixture") s.kind = ShiftSpec::Kind::mixture;
          else if (value == "mean_shift") s.kind = ShiftSpec::Kind::mean_shift;
          else throw FormatError("unknown shift kind '" + value + "'");
        } else if (key == "weight") {
          s.weight = parse_number(value);
        } else if (key == "pattern") {
          // Signed 1-based coordinates, like literals: 1, -3 fixes x1 = +1 and x3 = -1.
          s.pattern.clear();
          for (int lit : parse_int_list(value)) {
            if (lit == 0) throw FormatError("pattern entries are nonzero signed coordinates");
            s.pattern.emplace_back(std::abs(lit) - 1, lit > 0 ? 1 : -1);
          }
        } else if (key == "cloud") {
          if (value == "scaled_cube") s.cloud = ShiftSpec::Cloud::scaled_cube;
          else if (value == "gaussian_blob") s.cloud = ShiftSpec::Cloud::gaussian_blob;
          else throw FormatError("unknown cloud '" + value + "'");
        } else if (key == "scale") {
          s.scale = parse_number(value);
        } else if (key == "center") {
          s.center = parse_list(value);
        } else if (key == "mean") {
          s.mean = parse_list(value);
        } else if (key == "flip_labels") {
          s.flip_labels = parse_bool(value);
        } else {
          throw FormatError("unknown key '" + key + "'");
        }
      } else if (section == "concept") {
        set_concept_key(scn.concept_spec, key, value);
      } else if (section == "test_concept") {
        set_concept_key(test_concept, key, value);
      } else {
        throw FormatError("unknown section '" + section + "'");
      }
    } catch (const FormatError& e) {
      throw FormatError("scenario line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!support_flat.empty()) {
    const auto d = static_cast<std::size_t>(scn.marginal.dim);
    if (d == 0 || support_flat.size() % d != 0) {
      throw FormatError("scenario: support size is not a multiple of dim");
    }
    const auto rows = static_cast<Eigen::Index>(support_flat.size() / d);
    scn.marginal.support = Eigen::Map<RowMatrix>(support_flat.data(), rows, static_cast<Eigen::Index>(d));
  }
  if (have_test_concept) scn.test_concept = test_concept;
  scn.validate();
  return scn;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string format_scenario(const Scenario& scn) {
  std::ostringstream out;
  out << "[scenario]\n"
      << "name = " << scn.name << "\n"
      << "seed = " << scn.seed << "\n"
      << "n_train = " << scn.n_train << "\n"
      << "n_test = " << scn.n_test << "\n"
      << "noise_train = " << fmt17(scn.noise_train) << "\n"
      << "noise_test = " << fmt17(scn.noise_test) << "\n\n";

  static const char* marginals[] = {"hypercube", "gaussian", "finite"};
  out << "[marginal]\nkind = " << marginals[static_cast<int>(scn.marginal.kind)] << "\n"
      << "dim = " << scn.marginal.dim << "\n";
  if (scn.marginal.kind == MarginalSpec::Kind::finite) {
    out << "support = ";
    for (Eigen::Index i = 0; i < scn.marginal.support.rows(); ++i) {
      if (i) out << "; ";
      std::vector<double> row(scn.marginal.support.row(i).begin(), scn.marginal.support.row(i).end());
      out << join(row);
    }
    out << "\nweights = " << join(scn.marginal.weights) << "\n";
  }

  static const char* shifts[] = {"none", "subcube", "mixture", "mean_shift"};
  const auto& s = scn.shift;
  out << "\n[shift]\nkind = " << shifts[static_cast<int>(s.kind)] << "\n"
      << "weight = " << fmt17(s.weight) << "\n";
  if (!s.pattern.empty()) {
    std::vector<int> lits;
    for (const auto& [c, sign] : s.pattern) lits.push_back(sign * (c + 1));
    out << "pattern = " << join(lits) << "\n";
  }
  if (s.kind == ShiftSpec::Kind::mixture) {
    out << "cloud = " << (s.cloud == ShiftSpec::Cloud::scaled_cube ? "scaled_cube" : "gaussian_blob") << "\n"
        << "scale = " << fmt17(s.scale) << "\n";
    if (!s.center.empty()) out << "center = " << join(s.center) << "\n";
  }
  if (!s.mean.empty()) out << "mean = " << join(s.mean) << "\n";
  out << "flip_labels = " << (s.flip_labels ? "true" : "false") << "\n";

  out << "\n[concept]\n";
  format_concept(out, scn.concept_spec);
  if (scn.test_concept) {
    out << "\n[test_concept]\n";
    format_concept(out, *scn.test_concept);
  }
  return out.str();
}

}  // namespace pqtds::bench
