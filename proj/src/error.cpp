#include "carnot/error.hpp"

namespace carnot {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::AntisymmetryViolation: return "AntisymmetryViolation";
        case ErrorKind::JacobiViolation: return "JacobiViolation";
        case ErrorKind::StratificationViolation: return "StratificationViolation";
        case ErrorKind::GenerationFailure: return "GenerationFailure";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::NonpositiveScale: return "NonpositiveScale";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::NotExtendable: return "NotExtendable";
        case ErrorKind::FrameNotSpanning: return "FrameNotSpanning";
        case ErrorKind::NonpositiveEpsilon: return "NonpositiveEpsilon";
        case ErrorKind::OutOfDomain: return "OutOfDomain";
        case ErrorKind::AlphaOutOfRange: return "AlphaOutOfRange";
        case ErrorKind::CFLViolation: return "CFLViolation";
        case ErrorKind::DegenerateEpsilonRequiresLift: return "DegenerateEpsilonRequiresLift";
        case ErrorKind::EmptyFitRegion: return "EmptyFitRegion";
        case ErrorKind::CoercivityMismatch: return "CoercivityMismatch";
        case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
        case ErrorKind::Divergence: return "Divergence";
        case ErrorKind::BudgetExhausted: return "BudgetExhausted";
        case ErrorKind::NotSupportingPlane: return "NotSupportingPlane";
        case ErrorKind::BarrierSearchFailed: return "BarrierSearchFailed";
        case ErrorKind::UsageError: return "UsageError";
        case ErrorKind::ConfigParseError: return "ConfigParseError";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

}  // namespace carnot
