#include "confpose/error.hpp"

namespace confpose {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotARotation: return "NotARotation";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EpsilonTooSmall: return "EpsilonTooSmall";
    case ErrorCode::AllPointsBehindCamera: return "AllPointsBehindCamera";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::DegenerateModel: return "DegenerateModel";
    case ErrorCode::NotStationary: return "NotStationary";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateShape: return "DegenerateShape";
    case ErrorCode::DegenerateHull: return "DegenerateHull";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::GenerationExhausted: return "GenerationExhausted";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::ModelMismatch: return "ModelMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(error_code_name(code)) + ": " + what);
}

}  // namespace confpose
