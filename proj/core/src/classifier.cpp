#include "pqtds/classifier.hpp"

#include "pqtds/errors.hpp"

namespace pqtds {

Classifier Classifier::threshold(Polynomial p, double theta) {
  if (!p.basis) throw InvalidArgument("Classifier::threshold: polynomial without basis");
  Classifier c;
  c.kind_ = Kind::poly_threshold;
  c.poly_ = std::move(p);
  c.theta_ = theta;
  return c;
}

Classifier Classifier::constant(int value) {
  if (value != 0 && value != 1) throw InvalidArgument("Classifier::constant: value must be 0 or 1");
  Classifier c;
  c.kind_ = Kind::constant;
  c.constant_ = value;
  return c;
}

Classifier Classifier::complement_of(const Classifier& base) {
  Classifier c;
  c.kind_ = Kind::complement;
  c.base_ = std::make_shared<const Classifier>(base);
  return c;
}

Classifier Classifier::external(std::string name, Fn fn) {
  if (!fn) throw InvalidArgument("Classifier::external: empty callable");
  Classifier c;
  c.kind_ = Kind::external;
  c.fn_ = std::move(fn);
  c.name_ = std::move(name);
  return c;
}

int Classifier::operator()(std::span<const double> x) const {
  switch (kind_) {
    case Kind::poly_threshold:
      return poly_(x) >= theta_ ? 1 : 0;
    case Kind::constant:
      return constant_;
    case Kind::complement:
      return 1 - (*base_)(x);
    case Kind::external:
      return fn_(x) != 0 ? 1 : 0;
  }
  return 0;
}

const Polynomial& Classifier::polynomial() const {
  if (kind_ != Kind::poly_threshold) throw InvalidArgument("Classifier: not a thresholded polynomial");
  return poly_;
}

const Classifier& Classifier::base() const {
  if (kind_ != Kind::complement) throw InvalidArgument("Classifier: not a complement");
  return *base_;
}

const char* to_string(Classifier::Kind k) {
  switch (k) {
    case Classifier::Kind::poly_threshold:
      return "poly_threshold";
    case Classifier::Kind::complement:
      return "complement";
    case Classifier::Kind::constant:
      return "constant";
    case Classifier::Kind::external:
      return "external";
  }
  return "unknown";
}

}  // namespace pqtds
