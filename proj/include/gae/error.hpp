#pragma once

#include <stdexcept>
#include <string>

namespace gae {

// Base class for all library errors. The CLI maps subclasses to exit codes:
// ConfigError -> 2, NumericError -> 3, IoError -> 4.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class NumericError : public Error {
public:
  using Error::Error;
};

// A forward op produced NaN/Inf.
class FiniteCheckError : public NumericError {
public:
  using NumericError::NumericError;
};

// Iterative solver hit max_iter without meeting tol.
class NonConvergenceError : public NumericError {
public:
  NonConvergenceError(const std::string& what, int iterations)
      : NumericError(what), iterations(iterations) {}
  int iterations;
};

// Power-iteration iterate collapsed to zero.
class ZeroVectorError : public NumericError {
public:
  using NumericError::NumericError;
};

// Cosine distance on a vector with norm below threshold.
class ZeroNormError : public NumericError {
public:
  using NumericError::NumericError;
};

// Node-corruption sampling produced no noisy nodes.
class AllCleanError : public NumericError {
public:
  using NumericError::NumericError;
};

// A masking round would mask zero dimensions before the requested round count.
class ScheduleExhaustedError : public ConfigError {
public:
  ScheduleExhaustedError(const std::string& what, int last_feasible_round)
      : ConfigError(what), last_feasible_round(last_feasible_round) {}
  int last_feasible_round;
};

}  // namespace gae
