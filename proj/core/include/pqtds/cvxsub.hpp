#pragma once

// Convex subproblem behind every filtering step:
//
//   maximize a.c  subject to  c^T G c <= quad_bound,
//                             sum_x w_x |m(x).c| <= abs_bound,
//                             c in range(projector).
//
// G is the empirical Gram matrix of the reference sample S and the weighted
// rows are the distinct feature rows of S where the classifier fires.

#include "pqtds/classifier.hpp"
#include "pqtds/polycore.hpp"

#include <cstdint>
#include <span>
#include <string>

namespace pqtds {

struct SolverOptions {
  double opt_tol = 1e-6;
  double feas_tol = 1e-8;
  int max_newton_steps = 600;
};

class ConstraintSet {
 public:
  BasisPtr basis;
  Matrix gram;
  double quad_bound = 0.0;
  /// Distinct feature rows {m(x) : x in S, f(x) = 1}.
  RowMatrix abs_rows;
  /// Multiplicity of each distinct row times row_weight.
  Vector abs_weights;
  double abs_bound = 0.0;
  double row_weight = 0.0;
  Matrix projector;
  /// Rank of the reference feature matrix.
  Eigen::Index rank = 0;
  /// Whitening map c -> z with c^T G c = |z|^2 on range(projector) (rank x |basis|).
  Matrix whiten;
  /// Inverse map z -> c (|basis| x rank).
  Matrix unwhiten;
  /// abs_rows in whitened coordinates (rows x rank).
  RowMatrix abs_rows_white;
  /// Hash of reference features, multiplicities and bounds.
  std::string fingerprint;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(basis->size()); }
  double quad_value(const Vector& c) const;
  double abs_value(const Vector& c) const;
};

/// Constraint set P(f): quad_bound = 2 beta, abs_bound = 2 eps / (2R + eps).
ConstraintSet build_constraint_set(const Classifier& f, const Sample& s, BasisPtr basis,
                                   double beta, double eps, double slack_r);

/// Same constraint set from raw ingredients: reference feature rows (with
/// multiplicities), per-row weight, the indicator of which rows carry the
/// absolute-value constraint, and both bounds.
ConstraintSet build_constraint_set_from_rows(BasisPtr basis, const RowMatrix& reference_rows,
                                             std::span<const std::uint8_t> active,
                                             double row_weight, double quad_bound,
                                             double abs_bound);

enum class SolverStatus { optimal, closed_form, iteration_limit, numerical_failure };

const char* to_string(SolverStatus s);

struct WitnessSolution {
  std::size_t classifier_index = 0;
  Vector coefficients;
  double value = 0.0;
  double quad_residual = 0.0;
  double abs_residual = 0.0;
  SolverStatus status = SolverStatus::optimal;
  int newton_steps = 0;

  bool ok() const {
    return status == SolverStatus::optimal || status == SolverStatus::closed_form;
  }
};

/// Maximizes a.c over the constraint set restricted to the projector range.
/// On success the returned point satisfies both residuals <= feas_tol and
/// a.c >= OPT - opt_tol * max(1, OPT). Non-convergence is reported through
/// status, never by returning an infeasible point.
WitnessSolution solve_witness(const Vector& objective, const ConstraintSet& cs,
                              const SolverOptions& opts = {});

/// max |p(x)| over the constraint set (equal to max p(x) by symmetry).
/// Throws SolverFailure when the solve does not converge.
double max_abs_at_point(std::span<const double> x, const ConstraintSet& cs,
                        const SolverOptions& opts = {});

/// Whether max |p(x)| over the constraint set exceeds bound. Decided by
/// closed-form bounds when they are conclusive, by solve_witness otherwise.
bool exceeds_bound_at_point(std::span<const double> x, const ConstraintSet& cs, double bound,
                            const SolverOptions& opts = {});

}  // namespace pqtds
