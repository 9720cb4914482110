#pragma once

// Degree-l L1 polynomial regression followed by threshold rounding.

#include "pqtds/classifier.hpp"
#include "pqtds/polycore.hpp"

namespace pqtds {

struct L1Fit {
  Polynomial polynomial;
  /// (1/|S|) sum |p(x_i) - y_i|.
  double objective = 0.0;
  int newton_steps = 0;
  bool vertex = false;  // true when the crossover vertex was kept
};

/// Minimizes the empirical L1 loss over all polynomials of the basis.
/// Solved as a linear program (residual epigraph variables) by a barrier
/// method, then polished by a crossover to an optimal vertex.
L1Fit fit_l1(BasisPtr basis, const Sample& s, double opt_tol = 1e-8);

struct ThresholdChoice {
  double theta = 0.5;
  double empirical_error = 0.0;
};

/// Threshold minimizing empirical 0/1 error of 1{p(x) >= theta} among
/// {1/2}, midpoints of consecutive distinct sorted p(x_i), and one value
/// below / above all of them. Ties prefer 1/2, then the smaller theta.
ThresholdChoice best_threshold(std::span<const double> values, std::span<const std::uint8_t> labels);

Classifier threshold_round(const Polynomial& p, const Sample& s);

/// Fraction of labeled points with h(x) != y.
double empirical_error(const Classifier& h, const Sample& s);

}  // namespace pqtds
