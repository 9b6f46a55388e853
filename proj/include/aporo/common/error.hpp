#pragma once

#include <stdexcept>
#include <string>

namespace aporo {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (overlapping spans, bad k, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Input data could not be read or parsed.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  explicit ParseError(const std::string& message) : ParseError(message, 0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

/// A referenced input file does not exist.
class MissingInput : public Error {
 public:
  using Error::Error;
};

}  // namespace aporo
