#include "segfilter/error.hpp"

namespace segfilter {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::BadDimensions: return "BadDimensions";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::UnsupportedMaxval: return "UnsupportedMaxval";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::PredHasIgnore: return "PredHasIgnore";
    case ErrorCode::EmptyLoss: return "EmptyLoss";
    case ErrorCode::EmptyReport: return "EmptyReport";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

bool is_validation_error(ErrorCode code) {
  return code != ErrorCode::IoFailure;
}

}  // namespace segfilter
