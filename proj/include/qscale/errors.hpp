// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace qscale {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument is outside its mathematical domain (q <= 0, d < 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Too few runs (or too little variation) to identify the parameters.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Requested target loss lies at or below the achievable floor.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// The inversion has no solution (e.g. gamma = 0 with a nonzero adjustment).
class NoSolutionError : public Error {
 public:
  using Error::Error;
};

// Delta diagnostic requested without a q = 1 baseline run.
class MissingBaselineError : public Error {
 public:
  using Error::Error;
};

// Numerical failure (every multistart diverged).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qscale
