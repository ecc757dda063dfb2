#pragma once

#include <stdexcept>
#include <string>

namespace splinegp {

/// Bad arguments: wrong shapes, out-of-domain hyperparameters, malformed config.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Input data that violates the ingestion contract (schema, monotonicity, gaps).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: failed factorisation, singular matrix, non-finite values.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// The sampler could not find a finite starting point.
class InitializationError : public NumericalError {
 public:
  explicit InitializationError(const std::string& what) : NumericalError(what) {}
};

}  // namespace splinegp
