#pragma once

#include <stdexcept>
#include <string>

namespace cgan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input data failed validation (bad CSV cell, dimension mismatch, empty arm...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or otherwise left its valid numeric domain.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cgan
