#pragma once

#include <stdexcept>
#include <string>

namespace uctl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define UCTL_DEFINE_ERROR(Name)              \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

/// Argument outside the mathematical domain of an operation (negative radius, NaN state, ...).
UCTL_DEFINE_ERROR(DomainError);
/// Control value outside the closed cone U.
UCTL_DEFINE_ERROR(ControlSetViolation);
/// A value type was built with data breaking its invariant.
UCTL_DEFINE_ERROR(InvariantError);
/// Extended control with w0 = 0 has no finite counterpart in U.
UCTL_DEFINE_ERROR(ImpulsivePointError);
/// Feedback could not be evaluated at a state.
UCTL_DEFINE_ERROR(FeedbackDomainError);
/// No grid control achieves the required decrease.
UCTL_DEFINE_ERROR(CertificationFailure);
/// Discretized set (control grid, sample list) is empty.
UCTL_DEFINE_ERROR(EmptyGridError);
/// KL function does not satisfy beta(R,0) > R.
UCTL_DEFINE_ERROR(StrictnessError);
/// KL function does not decay below a level within the search horizon.
UCTL_DEFINE_ERROR(DecayFailure);
/// Query outside the stored strip window.
UCTL_DEFINE_ERROR(WindowExhausted);
/// Extended control cannot be projected to an original feedback value.
UCTL_DEFINE_ERROR(ProjectionDomainError);
/// Caller-supplied arguments violate a documented precondition.
UCTL_DEFINE_ERROR(PreconditionError);
/// Malformed run configuration or expression.
UCTL_DEFINE_ERROR(ConfigError);

#undef UCTL_DEFINE_ERROR

}  // namespace uctl
