#pragma once

#include <stdexcept>
#include <string>

namespace meshstyle {

// Base for every error raised by the library. Callers that only need to
// report failures can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (OBJ, label files, config). Carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structurally invalid data: bad indices, degenerate faces, bad config values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Array/tensor sizes that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Guidance provider failures. `retryable` marks transport-level failures
// (connection refused, timeout) that may succeed when repeated.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

// Wire-level violations: wrong protocol version, malformed body, bad tensor.
class ProtocolError : public ProviderError {
 public:
  explicit ProtocolError(const std::string& what) : ProviderError(what, false) {}
};

// Loss or gradient became NaN/inf during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace meshstyle
