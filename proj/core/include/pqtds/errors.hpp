#pragma once

#include <stdexcept>
#include <string>

namespace pqtds {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument or configuration outside its documented range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptySample : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Monomial basis would exceed the configured size cap.
class BasisTooLarge : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A convex subproblem did not reach its tolerances within the iteration budget.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// No threshold in [0, B] satisfies the filtering condition. Only reachable
/// when the witness was solved approximately.
class NoValidThreshold : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pqtds
