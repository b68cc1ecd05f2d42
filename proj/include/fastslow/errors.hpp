#pragma once

#include <stdexcept>
#include <string>

namespace fastslow {

enum class ErrorKind {
  MalformedExpression,
  DimensionMismatch,
  NonPositiveFrequencyAtStart,
  DomainError,
  FrequencyNotPositive,
  FixedPointDivergence,
  UndefinedAngle,
  ResonanceTooClose,
  ZeroFastEnergy,
  GridMismatch,
  NoPlateau,
  InvalidArgument,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; kind() tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // True for failures caused by user input rather than by a running integration.
  bool is_config_error() const noexcept {
    return kind_ == ErrorKind::MalformedExpression || kind_ == ErrorKind::DimensionMismatch ||
           kind_ == ErrorKind::NonPositiveFrequencyAtStart || kind_ == ErrorKind::InvalidArgument;
  }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedExpression: return "MalformedExpression";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonPositiveFrequencyAtStart: return "NonPositiveFrequencyAtStart";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::FrequencyNotPositive: return "FrequencyNotPositive";
    case ErrorKind::FixedPointDivergence: return "FixedPointDivergence";
    case ErrorKind::UndefinedAngle: return "UndefinedAngle";
    case ErrorKind::ResonanceTooClose: return "ResonanceTooClose";
    case ErrorKind::ZeroFastEnergy: return "ZeroFastEnergy";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::NoPlateau: return "NoPlateau";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace fastslow
