#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lgprep {

enum class ErrorKind {
  DuplicateInput,
  ShapeMismatch,
  TooLarge,
  NotVerified,
  SolverFailure,
  SingularDenominator,
  DivergentExpansion,
  OutOfRange,
  IllConditioned,
  NoPairs,
  OptimizationFailed,
  IntegratorFailure,
  ParseError,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DuplicateInput: return "DuplicateInput";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::NotVerified: return "NotVerified";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::SingularDenominator: return "SingularDenominator";
    case ErrorKind::DivergentExpansion: return "DivergentExpansion";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::NoPairs: return "NoPairs";
    case ErrorKind::OptimizationFailed: return "OptimizationFailed";
    case ErrorKind::IntegratorFailure: return "IntegratorFailure";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

// Every failure in the library is reported through this type. `detail`
// carries numeric context where the kind has one: the constraint strengths
// for SingularDenominator, the residual for SolverFailure, the norm drift for
// IntegratorFailure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::vector<double> detail = {})
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(std::move(detail)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::vector<double>& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::vector<double> detail_;
};

}  // namespace lgprep
