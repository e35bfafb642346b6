#pragma once

#include <stdexcept>
#include <string>

namespace atomint {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Invalid or inconsistent configuration (bad geometry, unknown keys, ...).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Iterative procedure failed to converge.
class ConvergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Not enough data points for the requested estimate.
class InsufficientDataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Step size too large for the fixed-step integrator.
class UnstableStepError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace atomint
