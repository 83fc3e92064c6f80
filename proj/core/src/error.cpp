#include "torus/error.hpp"

namespace torus {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::EventNotFound: return "EventNotFound";
    case ErrorCode::TooManySteps: return "TooManySteps";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::OrientationUndetermined: return "OrientationUndetermined";
    case ErrorCode::EscapeFailure: return "EscapeFailure";
    case ErrorCode::OriginApproachFailure: return "OriginApproachFailure";
    case ErrorCode::OutsideChart: return "OutsideChart";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NoReturn: return "NoReturn";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::InsufficientSpan: return "InsufficientSpan";
    case ErrorCode::NonDecaying: return "NonDecaying";
    case ErrorCode::ExponentTooSmall: return "ExponentTooSmall";
    case ErrorCode::BlowUpBefore: return "BlowUpBefore";
    case ErrorCode::EnvelopeViolated: return "EnvelopeViolated";
    case ErrorCode::ZeroFrequency: return "ZeroFrequency";
    case ErrorCode::UnknownSystem: return "UnknownSystem";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::UnknownSystem:
      return 1;
    default:
      return 2;
  }
}

}  // namespace torus
