#include "mocap/error.hpp"

namespace mocap {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InputNotFound: return "InputNotFound";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::SchemaInvalid: return "SchemaInvalid";
    case ErrorCode::JointSetMismatch: return "JointSetMismatch";
    case ErrorCode::ViewCountMismatch: return "ViewCountMismatch";
    case ErrorCode::FrameOutOfRange: return "FrameOutOfRange";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::MissingKeypoint: return "MissingKeypoint";
    case ErrorCode::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::InsufficientViews: return "InsufficientViews";
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::NotARotation: return "NotARotation";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateRays: return "DegenerateRays";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::IllConditionedMean: return "IllConditionedMean";
    case ErrorCode::DegenerateLines: return "DegenerateLines";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NegativeSolution: return "NegativeSolution";
    case ErrorCode::CalibrationFailed: return "CalibrationFailed";
    case ErrorCode::NonFiniteLatent: return "NonFiniteLatent";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::LineSearchFailure: return "LineSearchFailure";
    case ErrorCode::Diverged: return "Diverged";
  }
  return "UnknownError";
}

int error_exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InputNotFound:
    case ErrorCode::ConfigInvalid:
      return 2;
    case ErrorCode::SchemaInvalid:
    case ErrorCode::JointSetMismatch:
    case ErrorCode::ViewCountMismatch:
    case ErrorCode::FrameOutOfRange:
    case ErrorCode::TooShort:
    case ErrorCode::NonFiniteInput:
    case ErrorCode::MissingKeypoint:
    case ErrorCode::InsufficientCandidates:
    case ErrorCode::InsufficientOverlap:
    case ErrorCode::InsufficientViews:
      return 3;
    default:
      return 4;
  }
}

}  // namespace mocap
