#pragma once

#include <stdexcept>
#include <string>

namespace mjw {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point left the admissible set of the symbol (turning point, forbidden
/// region, non-positive depth, ...).
class DomainViolation : public Error {
 public:
  using Error::Error;
};

/// A phase point is off the energy shell C(x)|p| = 1 beyond tolerance.
class ShellViolation : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// The right-hand side stayed non-finite while the step size shrank to
/// nothing, typically at the edge of the admissible set.
class NonFiniteRhs : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

class ChartDegenerate : public Error {
 public:
  using Error::Error;
};

class AtlasFailure : public Error {
 public:
  using Error::Error;
};

class QuadratureNotConverged : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mjw
