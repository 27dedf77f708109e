#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace podar {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-domain arguments: non-finite states, empty object
// lists, negative attenuation arguments, mismatched array lengths.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Geometry for which the model is undefined, e.g. coincident centers where
// the closing direction has no unit vector.
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

// A normalization divisor of zero (all-zero signals).
class DegenerateNormalizationError : public Error {
 public:
  using Error::Error;
};

// A synthetic ground truth that produces no risk anywhere on the grid.
class DegenerateSpecError : public Error {
 public:
  using Error::Error;
};

// Goodness-of-fit is undefined when the observed signal has zero variance.
class UndefinedVarianceError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration (asymmetric grid, wrong cell counts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input file rejected; `line` is 1-based, 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_ = 0;
};

// Optimization diverged; carries the loss trace recorded up to the failure.
class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& message, std::vector<std::pair<int, double>> trace)
      : Error(message), trace_(std::move(trace)) {}

  const std::vector<std::pair<int, double>>& trace() const { return trace_; }

 private:
  std::vector<std::pair<int, double>> trace_;
};

}  // namespace podar
