#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace torus {

enum class ErrorCode {
  // ode_core
  StepSizeUnderflow,
  NonFiniteState,
  EventNotFound,
  TooManySteps,
  // center_chart
  InvalidField,
  OrientationUndetermined,
  EscapeFailure,
  OriginApproachFailure,
  OutsideChart,
  NoCrossing,
  OutOfRange,
  NoReturn,
  // action_angle
  SingularJacobian,
  // asymptotics
  InsufficientSpan,
  NonDecaying,
  ExponentTooSmall,
  BlowUpBefore,
  EnvelopeViolated,
  ZeroFrequency,
  // catalog / cli
  UnknownSystem,
  ConfigInvalid,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. The code identifies the failure
/// class; the message carries the numbers that triggered it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Comparison solution reaches infinity at `t_blow`.
class BlowUpError : public Error {
 public:
  BlowUpError(double t_blow, const std::string& what)
      : Error(ErrorCode::BlowUpBefore, what), t_blow_(t_blow) {}

  double t_blow() const noexcept { return t_blow_; }

 private:
  double t_blow_;
};

/// Config errors map to 1, verification failures to 3, everything numeric to 2.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace torus
