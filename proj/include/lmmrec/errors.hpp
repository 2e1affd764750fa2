#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmmrec {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input (formula text, cell specs, bad flag values).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  explicit ParseError(const std::string& what) : Error(what), position_(0) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Bad or inconsistent data: missing files, malformed records, empty
/// selections, mismatched tables.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-positive-definite systems, degenerate
/// likelihoods, non-convergence treated as fatal by the caller.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmmrec
