#pragma once

#include "pqtds/polycore.hpp"

namespace pqtds::detail {

struct InequalityLpResult {
  Vector x;
  double objective = 0.0;
  bool converged = false;
  int newton_steps = 0;
};

/// minimize c^T x subject to A x <= b, by a log-barrier path from the strictly
/// feasible x0. Directions in the null space of A are frozen at x0, so c must
/// lie in the row space of A for the problem to be bounded.
InequalityLpResult solve_inequality_lp(const Matrix& a, const Vector& b, const Vector& c,
                                       const Vector& x0, double gap_tol, int max_newton = 2000);

}  // namespace pqtds::detail
