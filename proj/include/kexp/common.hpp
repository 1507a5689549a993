#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kexp {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (dimension mismatch, bad flag, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A dense kernel produced non-finite values or exceeded its iteration cap.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Parse failure in an input file; carries the offending line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// Number represented as mantissa * exp(log_scale). Keeps defect values
/// and divided differences representable when the raw magnitude would
/// under- or overflow.
struct ScaledComplex {
  Complex mantissa{0.0, 0.0};
  double log_scale = 0.0;

  double log_abs() const {
    const double a = std::abs(mantissa);
    return a > 0.0 ? std::log(a) + log_scale
                   : -std::numeric_limits<double>::infinity();
  }
  Complex value() const { return mantissa * std::exp(log_scale); }
};

}  // namespace kexp
