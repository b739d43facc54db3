#pragma once

#include <stdexcept>
#include <string>

namespace carnot {

enum class ErrorKind {
    AntisymmetryViolation,
    JacobiViolation,
    StratificationViolation,
    GenerationFailure,
    ParseError,
    NonpositiveScale,
    NotPositiveDefinite,
    NotExtendable,
    FrameNotSpanning,
    NonpositiveEpsilon,
    OutOfDomain,
    AlphaOutOfRange,
    CFLViolation,
    DegenerateEpsilonRequiresLift,
    EmptyFitRegion,
    CoercivityMismatch,
    ResolutionTooCoarse,
    Divergence,
    BudgetExhausted,
    NotSupportingPlane,
    BarrierSearchFailed,
    UsageError,
    ConfigParseError,
    InvalidArgument,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace carnot
