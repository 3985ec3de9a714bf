#pragma once

#include <stdexcept>
#include <string>

namespace dmpc {

/// Invalid physical or configuration parameter (bad R/C value, bad bounds, ...).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Scenario / input file problem (missing file, malformed row, inconsistent schema).
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Iterative routine failed to converge. Carries the last residual seen.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& msg, double residual)
      : std::runtime_error(msg + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace dmpc
