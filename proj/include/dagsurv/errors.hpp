#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dagsurv {

// Base of every error raised by the library. Callers that only care about
// "something in dagsurv failed" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Operand shapes do not fit the operation.
class ShapeError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

class NonSquareError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

class CycleError : public Error {
 public:
  CycleError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}

  // A node that lies on a directed cycle.
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DegenerateRangeError : public Error {
 public:
  using Error::Error;
};

class TooSmallError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

class NonScalarLossError : public Error {
 public:
  using Error::Error;
};

class NoComparablePairsError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the file name and 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace dagsurv
