#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sefa {

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  NotSymmetric,
  KTooLarge,
  NoConvergence,
  DimMismatch,
  NotUnit,
  BadShape,
  TooFewSamples,
  BadMagic,
  UnsupportedDtype,
  NotTwoDimensional,
  TruncatedFile,
  IoFailure,
  SchemaViolation,
  MissingTensor,
  ShapeMismatch,
  LatentDimInconsistent,
  InvalidSelection,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NotUnit: return "NotUnit";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::NotTwoDimensional: return "NotTwoDimensional";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::MissingTensor: return "MissingTensor";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LatentDimInconsistent: return "LatentDimInconsistent";
    case ErrorCode::InvalidSelection: return "InvalidSelection";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code and
/// a message naming the offending property.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sefa
