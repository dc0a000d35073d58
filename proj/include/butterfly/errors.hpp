#pragma once

#include <stdexcept>
#include <string>

namespace butterfly {

/// Root of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameters (bounds, fractions, grids, scheme names).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Symbol, noise or matrix dimensions inconsistent with the topology.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scheme was applied to a topology it is not defined for.
class UnsupportedSchemeError : public Error {
 public:
  using Error::Error;
};

/// Measure-zero channel realizations: zero denominators, rank loss, vanishing gains.
class DegenerateChannelError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class InvalidCutError : public Error {
 public:
  using Error::Error;
};

}  // namespace butterfly
