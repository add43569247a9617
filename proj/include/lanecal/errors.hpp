#pragma once

#include <stdexcept>
#include <string>

namespace lanecal {

enum class ErrorCode {
  DegenerateSegment,
  DegenerateVd,
  CollinearPair,
  UndefinedAngle,
  EmptyInput,
  RankDeficient,
  TooFewSegments,
  NoConsensus,
  DimensionMismatch,
  SingularInnovation,
  HorizonLine,
  TangentSingularity,
  TooFewBoundaries,
  TooFewPairs,
  NonConvergence,
  ConfigError,
  NonInvertibleHomography,
  IoError,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::DegenerateVd: return "DegenerateVd";
    case ErrorCode::CollinearPair: return "CollinearPair";
    case ErrorCode::UndefinedAngle: return "UndefinedAngle";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooFewSegments: return "TooFewSegments";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::HorizonLine: return "HorizonLine";
    case ErrorCode::TangentSingularity: return "TangentSingularity";
    case ErrorCode::TooFewBoundaries: return "TooFewBoundaries";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NonInvertibleHomography: return "NonInvertibleHomography";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

/// Error type carrying a machine-checkable code alongside the message.
class CalibError : public std::runtime_error {
 public:
  CalibError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw CalibError(code, what);
}

}  // namespace lanecal
