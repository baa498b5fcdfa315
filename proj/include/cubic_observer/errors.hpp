#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cubic_observer {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so each class belongs to exactly one failure category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- bad input (exit code 2) ----------------------------------------------

class InputError : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public InputError {
 public:
  using InputError::InputError;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : InputError(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Variable index or delay slot outside the configured model dimensions.
class RangeError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : InputError(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// ---- method says no (exit code 1) -----------------------------------------

class VerificationError : public Error {
 public:
  using Error::Error;
};

class DecouplingInfeasible : public VerificationError {
 public:
  using VerificationError::VerificationError;
};

class InvalidCertificate : public VerificationError {
 public:
  using VerificationError::VerificationError;
};

// ---- numerics failed (exit code 3) ----------------------------------------

class NumericalError : public Error {
 public:
  using Error::Error;
};

class EvalError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A search ran out of budget. This never proves infeasibility.
class SearchFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step, double time)
      : NumericalError(what), step_(step), time_(time) {}
  long step() const noexcept { return step_; }
  double time() const noexcept { return time_; }

 private:
  long step_;
  double time_;
};

}  // namespace cubic_observer
