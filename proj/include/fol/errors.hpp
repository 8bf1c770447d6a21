#pragma once

/**
 * @file errors.hpp
 * @brief Exception types shared by all modules.
 *
 * Every failure class maps to a distinct CLI exit code (see exit_code()).
 */

#include <stdexcept>
#include <string>

namespace fol {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 10; }
};

/// Parameters outside their admissible range (a, s, n, orders, radii).
class ParameterError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed or insufficient input data.
class InvalidInput : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// A theoretical guarantee failed numerically (e.g. empty kernel).
class ConsistencyError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Projection produced a negative residual: the rule is too coarse.
class QuadratureOrderError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

/// Trace is negative on the thin sphere.
class InadmissibleTrace : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 6; }
};

/// Theta-conditions or norm conditions of a competitor violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 7; }
};

/// No epsilon on the dyadic grid passes the corpus.
class CalibrationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 8; }
};

/// Vanishing boundary mass where a frequency-normalized quantity is needed.
class DegeneratePoint : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 9; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 11; }
};

}  // namespace fol
