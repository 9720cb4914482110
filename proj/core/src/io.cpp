#include "pqtds/io.hpp"

#include "pqtds/errors.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unistd.h>

namespace pqtds::io {

namespace {

constexpr const char* kClassifierTag = "pqtds-classifier";
constexpr const char* kSelectorTag = "pqtds-selector";
constexpr int kVersion = 1;

double parse_real(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw FormatError("expected a real number, got '" + tok + "'");
  }
  return v;
}

long long parse_int(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw FormatError("expected an integer, got '" + tok + "'");
  }
  return v;
}

std::string next_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw FormatError(std::string("unexpected end of record while reading ") + what);
  return tok;
}

void expect(std::istream& in, const std::string& keyword) {
  const std::string tok = next_token(in, keyword.c_str());
  if (tok != keyword) throw FormatError("expected '" + keyword + "', got '" + tok + "'");
}

double read_real_field(std::istream& in, const std::string& key) {
  expect(in, key);
  return parse_real(next_token(in, key.c_str()));
}

long long read_int_field(std::istream& in, const std::string& key) {
  expect(in, key);
  return parse_int(next_token(in, key.c_str()));
}

void write_basis(std::ostream& out, const MonomialBasis& b) {
  out << "basis " << b.dimension() << ' ' << b.degree() << ' ' << (b.multilinear() ? 1 : 0) << '\n';
}

BasisPtr read_basis(std::istream& in) {
  expect(in, "basis");
  const auto d = parse_int(next_token(in, "basis dimension"));
  const auto l = parse_int(next_token(in, "basis degree"));
  const auto m = parse_int(next_token(in, "basis multilinear flag"));
  if (d < 1 || l < 0 || (m != 0 && m != 1)) throw FormatError("invalid basis descriptor");
  return make_basis(static_cast<int>(d), static_cast<int>(l), m == 1);
}

void write_coefficients(std::ostream& out, const Vector& c) {
  out << "coefficients " << c.size();
  for (Eigen::Index i = 0; i < c.size(); ++i) out << ' ' << format_real(c[i]);
  out << '\n';
}

Vector read_coefficients(std::istream& in, std::size_t expected) {
  expect(in, "coefficients");
  const auto n = parse_int(next_token(in, "coefficient count"));
  if (n < 0 || static_cast<std::size_t>(n) != expected) {
    throw FormatError("coefficient count does not match the basis size");
  }
  Vector c(n);
  for (Eigen::Index i = 0; i < n; ++i) c[i] = parse_real(next_token(in, "coefficient"));
  return c;
}

void check_header(std::istream& in, const char* tag) {
  expect(in, tag);
  const auto v = parse_int(next_token(in, "version"));
  if (v != kVersion) throw FormatError(std::string(tag) + ": unsupported version " + std::to_string(v));
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_classifier(std::ostream& out, const Classifier& c) {
  out << kClassifierTag << ' ' << kVersion << '\n' << "kind " << to_string(c.kind()) << '\n';
  switch (c.kind()) {
    case Classifier::Kind::poly_threshold:
      write_basis(out, *c.polynomial().basis);
      out << "threshold " << format_real(c.threshold_value()) << '\n';
      write_coefficients(out, c.polynomial().coefficients);
      break;
    case Classifier::Kind::constant:
      out << "value " << c.constant_value() << '\n';
      break;
    case Classifier::Kind::complement:
      write_classifier(out, c.base());
      break;
    case Classifier::Kind::external:
      throw FormatError("classifier '" + c.name() + "' wraps external code and cannot be serialized");
  }
  out << "end\n";
}

Classifier read_classifier(std::istream& in) {
  check_header(in, kClassifierTag);
  expect(in, "kind");
  const std::string kind = next_token(in, "kind");
  auto finish = [&](Classifier c) {
    expect(in, "end");
    return c;
  };
  if (kind == "poly_threshold") {
    const BasisPtr basis = read_basis(in);
    const double theta = read_real_field(in, "threshold");
    Vector coef = read_coefficients(in, basis->size());
    return finish(Classifier::threshold(Polynomial(basis, std::move(coef)), theta));
  }
  if (kind == "constant") {
    const auto v = read_int_field(in, "value");
    if (v != 0 && v != 1) throw FormatError("constant classifier value must be 0 or 1");
    return finish(Classifier::constant(static_cast<int>(v)));
  }
  if (kind == "complement") {
    return finish(Classifier::complement_of(read_classifier(in)));
  }
  throw FormatError("unknown classifier kind '" + kind + "'");
}

void write_selector(std::ostream& out, const Selector& s, const ICFConfig& cfg) {
  out << kSelectorTag << ' ' << kVersion << '\n'
      << "bound " << format_real(s.bound()) << '\n'
      << "degree " << cfg.degree << '\n'
      << "multilinear " << (cfg.multilinear ? 1 : 0) << '\n'
      << "slack_r " << format_real(cfg.slack_r) << '\n'
      << "beta " << format_real(cfg.beta) << '\n'
      << "eps " << format_real(cfg.eps) << '\n'
      << "hyper_a " << format_real(cfg.hyper_a) << '\n'
      << "opt_tol " << format_real(s.solver().opt_tol) << '\n'
      << "feas_tol " << format_real(s.solver().feas_tol) << '\n'
      << "max_newton_steps " << s.solver().max_newton_steps << '\n'
      << "classifiers " << s.family().size() << '\n';
  for (const auto& c : s.family()) write_classifier(out, c);
  out << "fingerprints " << s.constraints().size() << '\n';
  for (const auto& cs : s.constraints()) out << cs.fingerprint << '\n';
  out << "rules " << s.rules().size() << '\n';
  for (const auto& r : s.rules()) {
    out << "rule " << r.classifier_index << " tau " << format_real(r.tau) << '\n';
    write_coefficients(out, r.witness.coefficients);
  }
  out << "end\n";
}

SelectorRecord read_selector(std::istream& in, const Sample& reference) {
  check_header(in, kSelectorTag);
  const double bound = read_real_field(in, "bound");
  ICFConfig cfg;
  cfg.degree = static_cast<int>(read_int_field(in, "degree"));
  const auto ml = read_int_field(in, "multilinear");
  if (ml != 0 && ml != 1) throw FormatError("multilinear flag must be 0 or 1");
  cfg.multilinear = ml == 1;
  cfg.slack_r = read_real_field(in, "slack_r");
  cfg.beta = read_real_field(in, "beta");
  cfg.eps = read_real_field(in, "eps");
  cfg.hyper_a = read_real_field(in, "hyper_a");
  cfg.solver.opt_tol = read_real_field(in, "opt_tol");
  cfg.solver.feas_tol = read_real_field(in, "feas_tol");
  cfg.solver.max_newton_steps = static_cast<int>(read_int_field(in, "max_newton_steps"));
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("selector record: ") + e.what());
  }

  const auto k = read_int_field(in, "classifiers");
  if (k < 1) throw FormatError("selector record: empty classifier family");
  std::vector<Classifier> family;
  for (long long i = 0; i < k; ++i) family.push_back(read_classifier(in));

  const auto nf = read_int_field(in, "fingerprints");
  if (nf != k) throw FormatError("selector record: one fingerprint per classifier required");
  std::vector<std::string> fingerprints;
  for (long long i = 0; i < nf; ++i) fingerprints.push_back(next_token(in, "fingerprint"));

  if (reference.empty()) throw EmptySample("read_selector: empty reference sample");
  const BasisPtr basis = make_basis(reference.dim(), cfg.degree, cfg.multilinear);
  const RowMatrix feats = feature_matrix(*basis, reference);
  const double abs_bound = 2.0 * cfg.eps / (2.0 * cfg.slack_r + cfg.eps);
  std::vector<ConstraintSet> constraints;
  for (std::size_t j = 0; j < family.size(); ++j) {
    std::vector<std::uint8_t> active(reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i) {
      active[i] = static_cast<std::uint8_t>(family[j](reference.point(i)));
    }
    constraints.push_back(build_constraint_set_from_rows(basis, feats, active,
                                                         1.0 / static_cast<double>(reference.size()),
                                                         2.0 * cfg.beta, abs_bound));
    if (constraints.back().fingerprint != fingerprints[j]) {
      throw FormatError("selector record: reference sample does not reproduce the constraint set of classifier " +
                        std::to_string(j));
    }
  }

  const auto nr = read_int_field(in, "rules");
  if (nr < 0) throw FormatError("selector record: negative rule count");
  std::vector<FilterRule> rules;
  for (long long i = 0; i < nr; ++i) {
    const auto idx = read_int_field(in, "rule");
    if (idx < 0 || idx >= k) throw FormatError("selector record: rule classifier index out of range");
    const double tau = read_real_field(in, "tau");
    Vector coef = read_coefficients(in, basis->size());
    rules.push_back(FilterRule{static_cast<std::size_t>(idx), Polynomial(basis, std::move(coef)), tau});
  }
  expect(in, "end");
  return SelectorRecord{Selector(bound, std::move(family), std::move(constraints), std::move(rules), cfg.solver),
                        cfg};
}

void write_csv(std::ostream& out, const Sample& s) {
  for (int j = 0; j < s.dim(); ++j) out << (j ? "," : "") << 'x' << (j + 1);
  if (s.labeled()) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto x = s.point(i);
    for (std::size_t j = 0; j < x.size(); ++j) out << (j ? "," : "") << format_real(x[j]);
    if (s.labeled()) out << ',' << s.label(i);
    out << '\n';
  }
}

Sample read_csv(std::istream& in, bool label_last) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw FormatError("csv: no rows");

  auto is_number = [](const std::string& s) {
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return !s.empty() && end != s.c_str() && *end == '\0';
  };
  std::size_t first = 0;
  std::ptrdiff_t label_col = -1;
  const std::size_t width = rows.front().size();
  bool header = false;
  for (const auto& c : rows.front()) header = header || !is_number(c);
  if (header) {
    first = 1;
    for (std::size_t j = 0; j < width; ++j) {
      if (rows.front()[j] == "label") label_col = static_cast<std::ptrdiff_t>(j);
    }
  } else if (label_last) {
    label_col = static_cast<std::ptrdiff_t>(width) - 1;
  }
  const std::size_t d = width - (label_col >= 0 ? 1 : 0);
  if (d == 0) throw FormatError("csv: no feature columns");

  const std::size_t n = rows.size() - first;
  RowMatrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::uint8_t> labels;
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != width) {
      throw FormatError("csv line " + std::to_string(r + 1) + ": expected " + std::to_string(width) + " columns");
    }
    std::size_t out_col = 0;
    for (std::size_t j = 0; j < width; ++j) {
      double v = 0.0;
      try {
        v = parse_real(cells[j]);
      } catch (const FormatError& e) {
        throw FormatError("csv line " + std::to_string(r + 1) + ": " + e.what());
      }
      if (static_cast<std::ptrdiff_t>(j) == label_col) {
        if (v != 0.0 && v != 1.0) throw FormatError("csv line " + std::to_string(r + 1) + ": label must be 0 or 1");
        labels.push_back(static_cast<std::uint8_t>(v));
      } else {
        pts(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(out_col++)) = v;
      }
    }
  }
  if (label_col >= 0) return Sample(std::move(pts), std::move(labels));
  return Sample(std::move(pts));
}

Sample load_csv(const std::string& path, bool label_last) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return read_csv(in, label_last);
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot rename into '" + path + "'");
  }
}

}  // namespace pqtds::io
