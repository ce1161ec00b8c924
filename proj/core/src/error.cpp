#include "cdslam/error.hpp"

namespace cdslam {

std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAngleAtPi: return "AngleAtPi";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kDegeneratePlane: return "DegeneratePlane";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kDisparityTooSmall: return "DisparityTooSmall";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kInsufficientPoints: return "InsufficientPoints";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kEmptyWindow: return "EmptyWindow";
    case ErrorCode::kSingularReducedSystem: return "SingularReducedSystem";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace cdslam
