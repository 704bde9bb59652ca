#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace kamtori {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: dimension mismatch, negative action, non-positive h, ...
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Angle undefined because an action vanishes (x_i = y_i = 0).
class DegenerateAngleError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// Pendulum energy outside the libration band (0, 2).
class OutOfRegimeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// A non-1-DOF trajectory handed to a 1-DOF-only emitter.
class UnsupportedDimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// Brute-force lattice enumeration would exceed the size guard.
class LatticeSizeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// Malformed or inconsistent run configuration. line == 0 means "not tied to a line".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Numerical failures map to exit code 2 in the CLI.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public NumericalError {
 public:
  NonConvergenceError(double last_residual, std::optional<std::size_t> step_index = std::nullopt)
      : NumericalError(describe(last_residual, step_index)),
        last_residual_(last_residual),
        step_index_(step_index) {}

  double last_residual() const { return last_residual_; }
  std::optional<std::size_t> step_index() const { return step_index_; }

  NonConvergenceError at_step(std::size_t index) const { return {last_residual_, index}; }

 private:
  static std::string describe(double r, std::optional<std::size_t> step) {
    std::string msg = "implicit solve did not converge (last residual " + std::to_string(r) + ")";
    if (step) msg += " at step " + std::to_string(*step);
    return msg;
  }

  double last_residual_;
  std::optional<std::size_t> step_index_;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// refine_peak found no interior maximum in its bracket.
class RefinementError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace kamtori
