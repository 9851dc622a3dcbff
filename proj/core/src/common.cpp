#include "m3/common/error.hpp"

namespace m3 {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::AngleAtBranchCut: return "AngleAtBranchCut";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::BatchTooLarge: return "BatchTooLarge";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::EmptyCorrespondences: return "EmptyCorrespondences";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InsufficientMatches: return "InsufficientMatches";
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::DivergedNaN: return "DivergedNaN";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace m3
