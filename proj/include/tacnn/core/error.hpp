#pragma once

#include <stdexcept>
#include <string>

namespace tacnn {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid static configuration: indivisible groups, bad permutation, ...
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operand extents do not agree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data violates a precondition (empty set, bad label, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backward on a graph with nothing to differentiate.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary or text container (bad magic, truncated record, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace tacnn
