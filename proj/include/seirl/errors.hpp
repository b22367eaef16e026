#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace seirl {

/// Base class for every error raised by the library. Carries the name of the
/// module that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)), message_(what) {}

  const std::string& module() const noexcept { return module_; }
  /// what() without the module prefix.
  const std::string& message() const noexcept { return message_; }
  virtual const char* kind() const noexcept { return "error"; }

 private:
  std::string module_;
  std::string message_;
};

/// Input data violates a documented invariant (schema, sign bound, shape).
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

/// Iterative procedure stopped before meeting its tolerance. `trace` holds
/// the residual / gap / mass history that led to the failure.
class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& what, std::vector<double> trace = {})
      : Error(std::move(module), what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }
  const char* kind() const noexcept override { return "convergence"; }

 private:
  std::vector<double> trace_;
};

/// Mathematically undefined quantity (empty queue with demand, zero metric
/// denominator, singular correction term).
class DegenerateError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate"; }
};

}  // namespace seirl
