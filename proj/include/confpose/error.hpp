#pragma once

#include <stdexcept>
#include <string>

namespace confpose {

enum class ErrorCode {
  InvalidArgument,
  NotARotation,
  BehindCamera,
  DegenerateCovariance,
  LengthMismatch,
  EpsilonTooSmall,
  AllPointsBehindCamera,
  SingularNormalEquations,
  DegenerateModel,
  NotStationary,
  IllConditioned,
  DimensionMismatch,
  DegenerateShape,
  DegenerateHull,
  InsufficientSamples,
  GenerationExhausted,
  MalformedInput,
  ModelMismatch,
  Io,
};

const char* error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// C layer can translate it into a status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace confpose
