#pragma once

#include <stdexcept>
#include <string>

namespace mkme {

/// Raised when arguments violate an operation's preconditions
/// (dimension mismatch, empty sample, out-of-range parameter).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces a non-finite value or a linear
/// system cannot be solved to the required tolerance.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mkme
