#pragma once

#include <stdexcept>
#include <string>

namespace tcu {

/// Error classes map 1:1 to process exit codes (see exit_code_for).
class InputDomainError : public std::invalid_argument {
 public:
  explicit InputDomainError(const std::string& what) : std::invalid_argument(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Fit/solve problems that are structurally unsolvable (rank deficiency, no fixed point).
class IllConditionedError : public std::runtime_error {
 public:
  explicit IllConditionedError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values produced by an iterative routine (divergence).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Caller violated a documented precondition (e.g. non-PSD covariance).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int config = 2;
inline constexpr int input_domain = 3;
inline constexpr int ill_conditioned = 4;
inline constexpr int numerical = 5;
inline constexpr int io = 6;
inline constexpr int internal = 7;
}  // namespace exit_code

}  // namespace tcu
