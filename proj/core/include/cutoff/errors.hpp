#pragma once

#include <stdexcept>
#include <string>

namespace cutoff {

// Exit code contract: 0 success, 2 config error, 3 numerical failure,
// 4 invariant violation.

/// Bad inputs: malformed configuration, violated preconditions,
/// unsupported dimensions, non-finite arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 2;
};

/// Runtime numerical failure: divergence, quadrature non-convergence,
/// floating point range exhaustion, step-size underflow.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 3;
};

/// Quadrature finished but the achieved error estimate exceeds the
/// requested tolerance.
class AccuracyError : public NumericError {
 public:
  AccuracyError(const std::string& what, double achieved_error)
      : NumericError(what), achieved(achieved_error) {}
  double achieved;
};

/// A mathematical identity or conservation law failed beyond tolerance.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 4;
};

}  // namespace cutoff
