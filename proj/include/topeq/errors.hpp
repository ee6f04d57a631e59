#pragma once
// Exception hierarchy shared by every topeq module.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace topeq {

/// Root of all topeq failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- ode_core

/// Numerical failure inside an integrator or a solver built on top of one.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class StepLimitExceeded : public NumericalError {
 public:
  StepLimitExceeded(double reached, double target, std::size_t steps)
      : NumericalError("step limit exceeded after " + std::to_string(steps) +
                       " steps at t=" + std::to_string(reached) + " (target " +
                       std::to_string(target) + ")"),
        reached_(reached) {}
  double reached() const { return reached_; }

 private:
  double reached_;
};

class NonFiniteState : public NumericalError {
 public:
  explicit NonFiniteState(double t)
      : NumericalError("field produced a non-finite value at t=" + std::to_string(t)), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

class OutOfSpan : public Error {
 public:
  OutOfSpan(double s, double lo, double hi)
      : Error("query time " + std::to_string(s) + " outside trajectory span [" +
              std::to_string(lo) + ", " + std::to_string(hi) + "]") {}
};

// ---------------------------------------------------------------- sysdsl

class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::vector<std::string> expected, const std::string& found)
      : Error(format(position, expected, found)), position_(position), expected_(std::move(expected)) {}

  std::size_t position() const { return position_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  static std::string format(std::size_t pos, const std::vector<std::string>& expected,
                            const std::string& found) {
    std::string msg = "parse error at position " + std::to_string(pos) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += (i + 1 == expected.size()) ? " or " : ", ";
      msg += expected[i];
    }
    msg += ", found " + found;
    return msg;
  }

  std::size_t position_;
  std::vector<std::string> expected_;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(std::size_t position, const std::string& name)
      : ParseError(position, {"t", "x<k>", "function name"}, "unknown identifier '" + name + "'"),
        name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DimensionError : public ParseError {
 public:
  DimensionError(std::size_t position, int index, int dim)
      : ParseError(position, {"x1..x" + std::to_string(dim)}, "x" + std::to_string(index)),
        index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

class EvalError : public NumericalError {
 public:
  EvalError(const std::string& what, std::string subexpr)
      : NumericalError(what + " in '" + subexpr + "'"), subexpr_(std::move(subexpr)) {}
  const std::string& subexpression() const { return subexpr_; }

 private:
  std::string subexpr_;
};

class NonDifferentiable : public Error {
 public:
  explicit NonDifferentiable(const std::string& subexpr)
      : Error("abs is not differentiable: '" + subexpr + "'") {}
};

// ---------------------------------------------------------------- dynamics

class NotContractive : public NumericalError {
 public:
  explicit NotContractive(double slope)
      : NumericalError("fitted decay slope " + std::to_string(slope) +
                       " is not negative; the linear flow is not a uniform contraction"),
        slope_(slope) {}
  double slope() const { return slope_; }

 private:
  double slope_;
};

class SmallnessViolation : public Error {
 public:
  SmallnessViolation(double k_gamma, double alpha)
      : Error("smallness K*gamma < alpha fails: K*gamma=" + std::to_string(k_gamma) +
              ", alpha=" + std::to_string(alpha)) {}
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(int iterations, double increment)
      : NumericalError("Picard iteration did not converge: increment " + std::to_string(increment) +
                       " after " + std::to_string(iterations) + " iterations"),
        increment_(increment) {}
  double increment() const { return increment_; }

 private:
  double increment_;
};

class DerivativeMismatch : public NumericalError {
 public:
  DerivativeMismatch(const std::string& what, double discrepancy)
      : NumericalError(what + " discrepancy " + std::to_string(discrepancy)),
        discrepancy_(discrepancy) {}
  double discrepancy() const { return discrepancy_; }

 private:
  double discrepancy_;
};

class SingularJacobian : public NumericalError {
 public:
  explicit SingularJacobian(double det)
      : NumericalError("Jacobian of G is singular (det=" + std::to_string(det) + ")"), det_(det) {}
  double det() const { return det_; }

 private:
  double det_;
};

// ---------------------------------------------------------------- gallery / cli

class UnknownGalleryId : public Error {
 public:
  explicit UnknownGalleryId(const std::string& id) : Error("unknown gallery id '" + id + "'") {}
};

class OracleUnavailable : public Error {
 public:
  OracleUnavailable(const std::string& id, const std::string& which)
      : Error("no closed-form oracle '" + which + "' for gallery system " + id) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace topeq
