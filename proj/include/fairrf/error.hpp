#pragma once

#include <stdexcept>
#include <string>

namespace fairrf {

/// Root of every exception thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input vector has (numerically) zero variance where a correlation needs one.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed CSV / config input. The message carries file and line when known.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A fairness metric is undefined for the given sample (e.g. a group has no positives).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Training stopped because of non-finite values or a broken internal invariant.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace fairrf
