#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cdslam {

enum class ErrorCode {
  kAngleAtPi,
  kRankDeficient,
  kDegeneratePlane,
  kBehindCamera,
  kDisparityTooSmall,
  kDegenerate,
  kNoConsensus,
  kInsufficientPoints,
  kDiverged,
  kEmptyWindow,
  kSingularReducedSystem,
  kConfigInvalid,
  kNoOverlap,
  kIo,
};

std::string_view ToString(ErrorCode code);

// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cdslam
