#pragma once

#include <stdexcept>
#include <string>

namespace kws {

/// Base of every error raised by the library. The CLI maps the concrete type
/// onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or infeasible geometry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed by a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// IO failures, malformed files, checksum mismatches.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Bad command line.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// No threshold reaches the requested operating point.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double min_achievable)
      : Error(what), min_achievable_(min_achievable) {}
  double min_achievable() const { return min_achievable_; }

 private:
  double min_achievable_;
};

}  // namespace kws
