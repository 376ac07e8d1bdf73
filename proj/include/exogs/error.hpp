// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace exogs {

enum class Errc {
  ParseError,
  UnsupportedJoint,
  CycleError,
  DimensionMismatch,
  JointLimitViolation,
  OutOfRange,
  MissingFile,
  SchemaError,
  NonMonotonicTimestamps,
  NoValidView,
  NoGraspDetected,
  UnknownAsset,
  BehindCamera,
  UnsupportedLayout,
  MissingBinding,
  ImageLoadError,
  IndivisibleDimensions,
  LabelOutOfRange,
  IoError,
  LengthMismatch,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ParseError: return "ParseError";
    case Errc::UnsupportedJoint: return "UnsupportedJoint";
    case Errc::CycleError: return "CycleError";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::JointLimitViolation: return "JointLimitViolation";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::MissingFile: return "MissingFile";
    case Errc::SchemaError: return "SchemaError";
    case Errc::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case Errc::NoValidView: return "NoValidView";
    case Errc::NoGraspDetected: return "NoGraspDetected";
    case Errc::UnknownAsset: return "UnknownAsset";
    case Errc::BehindCamera: return "BehindCamera";
    case Errc::UnsupportedLayout: return "UnsupportedLayout";
    case Errc::MissingBinding: return "MissingBinding";
    case Errc::ImageLoadError: return "ImageLoadError";
    case Errc::IndivisibleDimensions: return "IndivisibleDimensions";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::IoError: return "IoError";
    case Errc::LengthMismatch: return "LengthMismatch";
  }
  return "UnknownError";
}

/// All intentional failures throw this; `code()` identifies which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace exogs
