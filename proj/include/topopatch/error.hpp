#pragma once

#include <stdexcept>
#include <string>

namespace topopatch {

// Base of every error raised by the library. Each subclass names a failure
// category callers may want to branch on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// Input has no usable variation (constant volume, single-bin histogram, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Ratio metric with a zero denominator.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace topopatch
