#pragma once

#include <stdexcept>
#include <string>

namespace graphaf {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command-line flags or configuration keys.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, graphs, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf, domain errors and divergence during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace graphaf
