#pragma once

#include <stdexcept>
#include <string>

namespace ctrw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chain rule, distribution or scenario violates its declared invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Arguments out of order or out of range.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Quadrature failure, singular elimination, non-finite results.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A sampler could not produce a draw (e.g. rejection budget exhausted).
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// The requested computation does not apply to the given inputs.
class NotApplicable : public Error {
 public:
  using Error::Error;
};

/// A property that must hold by construction was observed to fail.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace ctrw
