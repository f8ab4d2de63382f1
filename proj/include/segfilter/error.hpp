#pragma once

#include <stdexcept>
#include <string>

namespace segfilter {

// Every failure mode raised by the library. Input validation always throws
// one of these; no operation returns a partially constructed value.
enum class ErrorCode {
  BadMagic,
  UnsupportedVersion,
  BadDimensions,
  Truncated,
  TrailingBytes,
  NonFinite,
  UnsupportedMaxval,
  SizeMismatch,
  DimensionMismatch,
  LabelOutOfRange,
  PredHasIgnore,
  EmptyLoss,
  EmptyReport,
  InvalidConfig,
  InvalidManifest,
  MissingInput,
  IoFailure,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

// Exit-code buckets for the CLI: validation errors exit 2, runtime errors 1.
bool is_validation_error(ErrorCode code);

}  // namespace segfilter
