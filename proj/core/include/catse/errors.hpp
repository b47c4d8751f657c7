#pragma once

#include <stdexcept>
#include <string>

namespace catse {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not satisfy an operator's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// API misuse: bad arguments, wrong call order, variant/flag mismatch.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable input data (WAV, manifest, checkpoint).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace catse
