#pragma once

#include <stdexcept>
#include <string>

namespace mocap {

// Failure classes map onto CLI exit codes: input errors exit 2, validation
// errors exit 3, numerical failures exit 4.
enum class ErrorCode {
  // input / environment
  InputNotFound,
  ConfigInvalid,
  // validation of data against contracts
  SchemaInvalid,
  JointSetMismatch,
  ViewCountMismatch,
  FrameOutOfRange,
  TooShort,
  NonFiniteInput,
  MissingKeypoint,
  InsufficientCandidates,
  InsufficientOverlap,
  InsufficientViews,
  // numerical failures
  DegenerateRotation,
  NotARotation,
  BehindCamera,
  DegenerateRays,
  DegenerateConfiguration,
  IllConditionedMean,
  DegenerateLines,
  NoConsensus,
  RankDeficient,
  IllConditioned,
  NegativeSolution,
  CalibrationFailed,
  NonFiniteLatent,
  NonFiniteObjective,
  LineSearchFailure,
  Diverged,
};

const char* error_code_name(ErrorCode code);

// 0 = success, 2 = input, 3 = validation, 4 = numerical.
int error_exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace mocap
