#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ptlasso {

enum class ErrorCode {
  kInvalidDimensions,
  kDegenerateSupport,
  kInvalidBudget,
  kHorizonExceeded,
  kOutOfRange,
  kEmptySupport,
  kInvalidArgument,
  kConfigInvalid,
  kIoError,
  kInsufficientTrials,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimensions: return "invalid-dimensions";
    case ErrorCode::kDegenerateSupport: return "degenerate-support";
    case ErrorCode::kInvalidBudget: return "invalid-budget";
    case ErrorCode::kHorizonExceeded: return "horizon-exceeded";
    case ErrorCode::kOutOfRange: return "out-of-range";
    case ErrorCode::kEmptySupport: return "empty-support";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kConfigInvalid: return "config-invalid";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kInsufficientTrials: return "insufficient-trials";
  }
  return "unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ptlasso
