#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gm {

enum class ErrorCode {
  InvalidArgument,
  InvalidDepth,
  OutOfBounds,
  NoValidDepth,
  EmptyInstance,
  SingularHomography,
  DimensionMismatch,
  RoiOutOfBounds,
  NoSidewalk,
  IncompleteVetting,
  UnknownInstance,
  InvalidRecord,
  Unauthenticated,
  ChangesetClosed,
  AlreadyClosed,
  DuplicateNodeId,
  DanglingReference,
  NotOwner,
  NotFound,
  InvalidCoordinates,
  FormatError,
  InvariantViolation,
  IoError,
  DegenerateScene,
  LengthMismatch,
  EmptyInput,
  PrivacyViolation,
  Conflict,
  Unavailable,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NoValidDepth: return "NoValidDepth";
    case ErrorCode::EmptyInstance: return "EmptyInstance";
    case ErrorCode::SingularHomography: return "SingularHomography";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RoiOutOfBounds: return "RoiOutOfBounds";
    case ErrorCode::NoSidewalk: return "NoSidewalk";
    case ErrorCode::IncompleteVetting: return "IncompleteVetting";
    case ErrorCode::UnknownInstance: return "UnknownInstance";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::Unauthenticated: return "Unauthenticated";
    case ErrorCode::ChangesetClosed: return "ChangesetClosed";
    case ErrorCode::AlreadyClosed: return "AlreadyClosed";
    case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::NotOwner: return "NotOwner";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::InvalidCoordinates: return "InvalidCoordinates";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateScene: return "DegenerateScene";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::PrivacyViolation: return "PrivacyViolation";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::Unavailable: return "Unavailable";
  }
  return "Unknown";
}

inline constexpr ErrorCode kLastErrorCode = ErrorCode::Unavailable;

constexpr ErrorCode error_code_from_string(std::string_view name, ErrorCode fallback = ErrorCode::InvariantViolation) {
  for (int i = 0; i <= static_cast<int>(kLastErrorCode); ++i) {
    if (to_string(static_cast<ErrorCode>(i)) == name) return static_cast<ErrorCode>(i);
  }
  return fallback;
}

/// Exception carrying a machine-checkable error code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gm
