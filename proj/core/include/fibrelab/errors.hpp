#pragma once

#include <stdexcept>
#include <string>

namespace fibrelab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A network has the wrong output shape for the requested use (e.g. classification).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed tree, relabeling, or model structure.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Text could not be parsed (formulas, rationals, vectors).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// A guard (cube size, materialization size) was exceeded without override.
class GuardError : public Error {
 public:
  using Error::Error;
};

}  // namespace fibrelab
