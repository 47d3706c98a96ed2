#pragma once

#include <stdexcept>
#include <string>

namespace tutorqa {

/// Base for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (manifest, transcript, score table, calibration).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input data insufficient or degenerate for the requested computation.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Provider transport failure. Retryable failures (connection refused,
/// timeouts, 429, 5xx) are retried by the gateway with backoff.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class MalformedResponseError : public Error {
 public:
  using Error::Error;
};

/// Numbered-answer parser could not find exactly markers 1..n.
class ParseMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace tutorqa
