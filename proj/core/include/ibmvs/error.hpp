#pragma once

#include <stdexcept>
#include <string>

namespace ibmvs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Depth range that cannot be turned into an inverse-depth interval.
class InvalidRangeError : public Error {
 public:
  using Error::Error;
};

/// Two inputs that must share dimensions do not.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or unreadable file / configuration.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A configuration value outside its documented domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant was violated (a bug, not bad input).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace ibmvs
