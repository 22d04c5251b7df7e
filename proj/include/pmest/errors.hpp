#pragma once

#include <stdexcept>
#include <string>

namespace pmest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// C + shift is not numerically positive definite (e.g. lambda = 0 on a
/// rank-deficient covariance).
class SingularShift : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class InvalidScheme : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class DegenerateDenominator : public Error {
 public:
  using Error::Error;
};

/// Requested eta policy is undefined because d >= n (or the gap vanishes).
class InvalidRegime : public Error {
 public:
  using Error::Error;
};

/// alpha * Lambda_G / a_g + lambda I is singular; the lambda = 0 estimate
/// needs a strictly positive definite Lambda_G.
class SingularM : public Error {
 public:
  using Error::Error;
};

class SingularSigma : public Error {
 public:
  using Error::Error;
};

class DegenerateCluster : public Error {
 public:
  using Error::Error;
};

/// Malformed matrix file; carries a 1-based row/column location when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row = -1, long column = -1)
      : Error(format(what, row, column)), row_(row), column_(column) {}

  long row() const noexcept { return row_; }
  long column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, long row, long column) {
    std::string out = what;
    if (row >= 0) out += " (row " + std::to_string(row);
    if (column >= 0) out += (row >= 0 ? ", column " : " (column ") + std::to_string(column);
    if (row >= 0 || column >= 0) out += ")";
    return out;
  }

  long row_;
  long column_;
};

class NonFiniteValue : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Bad run configuration or command line; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pmest
