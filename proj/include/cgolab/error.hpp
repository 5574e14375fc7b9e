#pragma once

#include <stdexcept>
#include <string>

namespace cgolab {

// Base of every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input: bad shapes, non-positive parameters, schema violations.
struct ValidationError : Error {
  using Error::Error;
};

// Binary or text format problems while reading or writing files.
struct FormatError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Numerical breakdown: singular factorizations, non-finite results.
struct NumericalError : Error {
  using Error::Error;
};

// The interior problem looks singular or nearly so.
struct AssumptionViolation : NumericalError {
  using NumericalError::NumericalError;
};

// A certificate in the multi-frequency chain did not close.
struct GaugeObstruction : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace cgolab
