#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fluxlab {

enum class ErrorCode {
  InvalidInput,
  AmbiguousWinding,
  DegenerateZero,
  IncompleteSweep,
  NotAZero,
  NonSymmetricJacobian,
  EscapeTimeout,
  AmbiguousTarget,
  GainMismatch,
  GraphDisconnected,
  NoArborescence,
  NoSignedCycle,
  AmbiguousMinimum,
  ExactFormNoFlux,
  AssumptionViolated,
  ReducibleChain,
  WindowTooSmall,
  NotConverged,
  NegativeDensity,
  GridTooCoarse,
  GridMismatch,
  QuadratureFailure,
  StepTooLarge,
  InsufficientData,
  NonConvergence,
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::AmbiguousWinding: return "AmbiguousWinding";
    case ErrorCode::DegenerateZero: return "DegenerateZero";
    case ErrorCode::IncompleteSweep: return "IncompleteSweep";
    case ErrorCode::NotAZero: return "NotAZero";
    case ErrorCode::NonSymmetricJacobian: return "NonSymmetricJacobian";
    case ErrorCode::EscapeTimeout: return "EscapeTimeout";
    case ErrorCode::AmbiguousTarget: return "AmbiguousTarget";
    case ErrorCode::GainMismatch: return "GainMismatch";
    case ErrorCode::GraphDisconnected: return "GraphDisconnected";
    case ErrorCode::NoArborescence: return "NoArborescence";
    case ErrorCode::NoSignedCycle: return "NoSignedCycle";
    case ErrorCode::AmbiguousMinimum: return "AmbiguousMinimum";
    case ErrorCode::ExactFormNoFlux: return "ExactFormNoFlux";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::ReducibleChain: return "ReducibleChain";
    case ErrorCode::WindowTooSmall: return "WindowTooSmall";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NegativeDensity: return "NegativeDensity";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonConvergence: return "NonConvergence";
  }
  return "Unknown";
}

/// Errors caused by bad user input rather than numerical failure.
inline bool is_input_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::AmbiguousWinding:
    case ErrorCode::NoArborescence:
    case ErrorCode::GridMismatch:
    case ErrorCode::GridTooCoarse:
    case ErrorCode::StepTooLarge:
    case ErrorCode::InsufficientData:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& context)
      : std::runtime_error(std::string(error_name(code)) + ": " + context), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& context) { throw Error(code, context); }

}  // namespace fluxlab
