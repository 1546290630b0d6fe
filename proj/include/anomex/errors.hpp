#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace anomex {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Width of a vector or matrix does not match what the model expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied values are unusable (non-finite, out of domain).
class InputError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

// Malformed telemetry or artifact file. Row and column are 1-based; 0 means
// "not applicable".
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : InputError(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    std::string out = what;
    if (row != 0) out += " (row " + std::to_string(row);
    if (row != 0 && column != 0) out += ", column " + std::to_string(column);
    if (row != 0) out += ")";
    return out;
  }

  std::size_t row_;
  std::size_t column_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// Loss or intermediate value became non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

// No training point scores above 1 - epsilon.
class EmptyBaseline : public Error {
 public:
  using Error::Error;
};

class NoClusterFound : public Error {
 public:
  using Error::Error;
};

}  // namespace anomex
