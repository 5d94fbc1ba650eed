#pragma once

#include <stdexcept>
#include <string>

namespace relq {

enum class ErrorCategory { validation, solver, numerical, io, internal };

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::solver: return "solver";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::io: return "io";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

// axis names the dimension or field that failed validation, e.g. "action" or "cost".
class ValidationError : public Error {
 public:
  ValidationError(std::string axis, const std::string& what)
      : Error(ErrorCategory::validation, what), axis_(std::move(axis)) {}
  const std::string& axis() const { return axis_; }

 private:
  std::string axis_;
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual, long iterations)
      : Error(ErrorCategory::solver, what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  long iterations() const { return iterations_; }

 private:
  double residual_;
  long iterations_;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double condition = 0.0)
      : Error(ErrorCategory::numerical, what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

}  // namespace relq
