#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace htr {

enum class ErrorCode {
  EmptyAxis,
  ShapeMismatch,
  NonFinite,
  EmptyInput,
  EmptyReferenceSet,
  GlobalTokenUndefined,
  MissingReferenceMask,
  FrameMismatch,
  InvalidArgument,
  BadMagic,
  BadVersion,
  TruncatedPayload,
  UnsupportedFormat,
  HeaderMismatch,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyAxis: return "EmptyAxis";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyReferenceSet: return "EmptyReferenceSet";
    case ErrorCode::GlobalTokenUndefined: return "GlobalTokenUndefined";
    case ErrorCode::MissingReferenceMask: return "MissingReferenceMask";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (notably the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace htr
