#pragma once

#include <stdexcept>
#include <string>

namespace zeroclust {

/// Base class for every error raised by the library. The kind() string is
/// what the benchmark runner stores in a failed RunRecord.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed or truncated files, bad magic/version, shape mismatches on write.
class FormatError : public Error {
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "format"; }
};

/// Data that parses but violates an invariant (non-finite values, length mismatch).
class ValidationError : public Error {
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

/// A parameter outside its admissible range. The message names the parameter.
class ParameterError : public Error {
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "parameter"; }
};

/// Sampling scenario cannot be satisfied by the bank.
class ScenarioError : public Error {
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "scenario"; }
};

/// Numerical failure: singular covariance, eigen-solver breakdown.
class NumericError : public Error {
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "numeric"; }
};

/// Input on which a metric is not defined (e.g. every point an outlier).
class DegenerateInputError : public Error {
  public:
    using Error::Error;
    const char* kind() const noexcept override { return "degenerate"; }
};

}  // namespace zeroclust
