#pragma once

#include <stdexcept>
#include <string>

namespace hypomhd {

/// Stable error codes surfaced by the CLI as process exit status.
enum class ErrorCode : int {
  kDomain = 2,          // zero wavevector, parameter outside its admissible range
  kPrecondition = 3,    // under-resolved grid, dimension mismatch, missing data
  kConfig = 4,          // invalid experiment configuration
  kIntegration = 5,     // non-finite state during time stepping
  kIo = 6,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kDomain: return "domain_error";
    case ErrorCode::kPrecondition: return "precondition_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kIntegration: return "integration_failure";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCode::kDomain, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorCode::kPrecondition, what) {}
};

/// Raised when the integrator produces a non-finite coefficient.
class IntegrationFailure : public Error {
 public:
  IntegrationFailure(double time, const std::string& what)
      : Error(ErrorCode::kIntegration, what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace hypomhd
