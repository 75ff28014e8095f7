#pragma once

#include <stdexcept>
#include <string>

namespace lrals {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A dense assembly would exceed the size cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// An iterate or factor lost rank k.
class RankDropError : public Error {
 public:
  using Error::Error;
};

/// A dense factorization or eigensolve failed.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition does not hold (critical point, SPD, gap, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrals
