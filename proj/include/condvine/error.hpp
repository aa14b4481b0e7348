#pragma once

#include <stdexcept>
#include <string>

namespace condvine {

/// Input outside the mathematical domain of an operation (tau, theta, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A density, h-function or gradient evaluated to a non-finite or invalid value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, double u1, double u2, double parameter)
      : std::runtime_error(what), u1_(u1), u2_(u2), parameter_(parameter) {}

  double u1() const { return u1_; }
  double u2() const { return u2_; }
  double parameter() const { return parameter_; }

 private:
  double u1_;
  double u2_;
  double parameter_;
};

/// Iterative numerical routine failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration of a fitting or simulation routine.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mismatched shapes or malformed arguments at an API boundary.
class InterfaceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every candidate family failed while fitting a pair copula.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace condvine
