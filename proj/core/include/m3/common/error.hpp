#pragma once

#include <stdexcept>
#include <string>

namespace m3 {

// Every recoverable failure in the library is reported as an Error carrying one
// of these codes. Callers that care about the *kind* of failure switch on the
// code; the message carries context for logs.
enum class ErrorCode {
  // geometry
  BehindCamera,        // projection of a point with z <= 1e-9
  NonPositiveDepth,    // backprojection with z <= 0
  AngleAtBranchCut,    // rotation log at angle within 1e-6 of pi

  // prior / dump files
  BadMagic,
  VersionMismatch,
  DimensionMismatch,
  TruncatedFile,
  EmptyBatch,
  BatchTooLarge,
  DegenerateGeometry,  // focal estimation fed collinear/empty data

  // matching
  EmptyCorrespondences,
  NonPositiveTemperature,
  MissingGroundTruth,
  ShapeMismatch,

  // tracking
  InsufficientMatches,
  PointBehindCamera,
  DivergedNaN,

  // backend
  DisconnectedGraph,

  // window
  EmptyInput,

  // pipeline / metrics
  LengthMismatch,
  DegenerateTrajectory,
  ConfigError,
  ProviderError,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace m3
