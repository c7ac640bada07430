#pragma once

#include <stdexcept>
#include <string>

namespace abwv {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, malformed configuration, or violated preconditions.
/// The CLI maps this family to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

/// A configuration that makes the requested quantity mathematically
/// singular (e.g. epsilon = 0 for an amplified-shift formula).
struct SingularConfigError : ConfigError {
  using ConfigError::ConfigError;
};

/// A numeric or statistical procedure could not produce a result.
/// The CLI maps this family to exit code 3.
struct EstimationError : Error {
  using Error::Error;
};

/// Too few events/samples to evaluate an estimator.
struct InsufficientDataError : EstimationError {
  using EstimationError::EstimationError;
};

/// Estimator hit a genuine singularity of its defining formula (n2 == n1).
struct SingularEstimatorError : EstimationError {
  using EstimationError::EstimationError;
};

/// Peak fit failed outright (no peak) or did not converge where required.
struct FitFailureError : EstimationError {
  using EstimationError::EstimationError;
};

/// Numerical quadrature or differentiation failed its convergence check.
struct NumericFailureError : EstimationError {
  using EstimationError::EstimationError;
};

/// SNR requested on a trace whose noise reference has zero variance.
struct UndefinedSnrError : EstimationError {
  using EstimationError::EstimationError;
};

}  // namespace abwv
