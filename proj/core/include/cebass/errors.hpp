#pragma once

#include <stdexcept>
#include <string>

namespace cebass {

/// Base class for all errors raised by the library.
class FilterError : public std::runtime_error {
 public:
  explicit FilterError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A covariance matrix could not be factorised, or its condition number
/// exceeds the usable range. The message names the quantity and, when the
/// failure happens inside a filter run, the time step.
class SingularCovarianceError : public FilterError {
 public:
  using FilterError::FilterError;
};

/// An iterative computation did not converge within its iteration budget.
class ConvergenceError : public FilterError {
 public:
  using FilterError::FilterError;
};

/// The observation map cannot recover the full state within the allowed
/// stacking depth.
class UnobservableModelError : public FilterError {
 public:
  using FilterError::FilterError;
};

/// Invalid configuration (bad dimensions, empty horizon sets, bad JSON...).
/// The CLI maps this to exit code 2.
class ConfigError : public FilterError {
 public:
  using FilterError::FilterError;
};

/// Malformed input data (CSV parse errors, column mismatches...).
/// The CLI maps this to exit code 3.
class DataError : public FilterError {
 public:
  using FilterError::FilterError;
};

/// Every candidate weight collapsed to -inf. Should be unreachable with the
/// robust proposals; kept as a guard.
class DegenerateFilterError : public FilterError {
 public:
  using FilterError::FilterError;
};

}  // namespace cebass
