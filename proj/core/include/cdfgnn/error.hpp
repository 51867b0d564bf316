#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdfgnn {

/// Root of every error thrown by the library. The CLI maps each leaf class to
/// an exit status (data errors 3, protocol/internal 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller-supplied argument (sizes, ranges, empty inputs).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Conforming-shape violation in a matrix kernel.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Vertex or class index outside the declared range.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Corrupt, truncated, or inconsistent persisted data.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// File-format version or CSV schema mismatch.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Violation of the master/mirror messaging protocol or a barrier timeout.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdfgnn
