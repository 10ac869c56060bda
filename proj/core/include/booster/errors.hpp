#pragma once

#include <stdexcept>
#include <string>

namespace booster {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced during a forward or backward pass.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: unknown architecture, bad plan field, label out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, truncated payload, wrong version).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Persisted state failed an integrity check or is incomplete.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Required dataset files are missing or unreadable.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace booster
