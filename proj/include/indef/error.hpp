#pragma once

#include <stdexcept>
#include <string>

namespace indef {

enum class ErrorCode {
  NonPositiveLength,
  NegativeUpsilon,
  PositionOutOfRange,
  OverlappingDensityIntervals,
  NonFiniteValue,
  ToleranceNotMet,
  NonRealRequired,
  TruncationNotConverged,
  ExtrapolationUnstable,
  DegenerateHamiltonian,
  InvalidHamiltonian,
  NotAtomic,
  NotFiniteLength,
  WindowTouchesAtomZero,
  UnsupportedShape,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveLength: return "NonPositiveLength";
    case ErrorCode::NegativeUpsilon: return "NegativeUpsilon";
    case ErrorCode::PositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::OverlappingDensityIntervals: return "OverlappingDensityIntervals";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::NonRealRequired: return "NonRealRequired";
    case ErrorCode::TruncationNotConverged: return "TruncationNotConverged";
    case ErrorCode::ExtrapolationUnstable: return "ExtrapolationUnstable";
    case ErrorCode::DegenerateHamiltonian: return "DegenerateHamiltonian";
    case ErrorCode::InvalidHamiltonian: return "InvalidHamiltonian";
    case ErrorCode::NotAtomic: return "NotAtomic";
    case ErrorCode::NotFiniteLength: return "NotFiniteLength";
    case ErrorCode::WindowTouchesAtomZero: return "WindowTouchesAtomZero";
    case ErrorCode::UnsupportedShape: return "UnsupportedShape";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Numerical failures (as opposed to bad input) are the ones a caller may
/// retry with looser tolerances.
inline bool is_numerical(ErrorCode code) {
  return code == ErrorCode::ToleranceNotMet ||
         code == ErrorCode::TruncationNotConverged ||
         code == ErrorCode::ExtrapolationUnstable;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace indef
