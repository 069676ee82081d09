#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace igp {

/// Parameter outside its mathematical domain (rho outside (0,1), chi < 0, ...).
class ParameterDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Cholesky or other factorization failed even after jitter escalation,
/// or the target density became non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid records, inconsistent config.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

/// Operation called with inputs it does not support (single chain for R-hat,
/// empty chains for summaries).
class UnsupportedInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace igp
