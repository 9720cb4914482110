#pragma once

#include "pqtds/polycore.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>

namespace pqtds {

/// Boolean function on R^d. Either a thresholded polynomial 1{p(x) >= theta},
/// a constant, the complement 1 - g of another classifier, or an opaque
/// callable (external; not serializable).
class Classifier {
 public:
  enum class Kind { poly_threshold, complement, constant, external };
  using Fn = std::function<int(std::span<const double>)>;

  static Classifier threshold(Polynomial p, double theta);
  static Classifier constant(int value);
  static Classifier complement_of(const Classifier& base);
  static Classifier external(std::string name, Fn fn);

  Kind kind() const { return kind_; }
  int operator()(std::span<const double> x) const;

  /// Only valid for poly_threshold.
  const Polynomial& polynomial() const;
  double threshold_value() const { return theta_; }
  int constant_value() const { return constant_; }
  /// Only valid for complement.
  const Classifier& base() const;
  const std::string& name() const { return name_; }

 private:
  Classifier() = default;

  Kind kind_ = Kind::constant;
  Polynomial poly_;
  double theta_ = 0.0;
  int constant_ = 0;
  std::shared_ptr<const Classifier> base_;
  Fn fn_;
  std::string name_;
};

const char* to_string(Classifier::Kind k);

}  // namespace pqtds
