#pragma once

#include <stdexcept>
#include <string>

namespace jkofp {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A density violated its floor or unit-mass invariant.
class InvalidDensity : public Error {
 public:
  using Error::Error;
};

/// A precondition on arguments (grid sizes, step sizes, ranges) failed.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Newton iteration cap reached in a JKO step.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// A transport map or quantile function lost strict monotonicity.
class MonotonicityLoss : public Error {
 public:
  using Error::Error;
};

/// The step size is too large for the stated smallness condition.
class SmallnessViolated : public Error {
 public:
  using Error::Error;
};

/// A scaling fit was requested with too few usable points.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// The reference PDE solve is not accurate enough to judge JKO errors.
class OracleTooCoarse : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace jkofp
