#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cvrpsd {

/// Input data is malformed or inconsistent (files, dimensions, permutations).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A text file could not be parsed; carries the 1-based offending line.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& message)
      : DataError("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Memory or I/O resources were insufficient for the request.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the documented domain of an operation.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A structure produced by this library failed its own consistency checks.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cvrpsd
