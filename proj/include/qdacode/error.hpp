#pragma once

#include <stdexcept>
#include <string>

namespace qdacode {

/// Base of every error thrown by the library. The CLI maps each subclass to a
/// distinct process exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input files (exit code 2).
class InputError : public Error {
public:
  using Error::Error;
};

/// A metric precondition was violated, e.g. no overlapping items (exit code 3).
class MetricError : public Error {
public:
  using Error::Error;
};

/// The run store on disk conflicts with the current inputs (exit code 4).
class StoreConflict : public Error {
public:
  using Error::Error;
};

/// The completion endpoint could not be reached or kept failing (exit code 5).
class TransportError : public Error {
public:
  TransportError(const std::string& what, int status = 0, bool retryable = false)
      : Error(what), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

private:
  int status_;
  bool retryable_;
};

/// Credentials rejected by the endpoint. Never retried.
class AuthError : public TransportError {
public:
  AuthError(const std::string& what, int status) : TransportError(what, status, false) {}
};

/// The endpoint answered but the answer is unusable (empty body, bad JSON).
class ProtocolError : public TransportError {
public:
  explicit ProtocolError(const std::string& what) : TransportError(what, 0, false) {}
};

}  // namespace qdacode
