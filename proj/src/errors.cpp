#include "adlab/errors.hpp"

namespace adlab {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::DegenerateDof: return "DegenerateDof";
        case ErrorCode::ZeroSignal: return "ZeroSignal";
        case ErrorCode::NotUnitNorm: return "NotUnitNorm";
        case ErrorCode::IdentificationFailure: return "IdentificationFailure";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::DataError: return "DataError";
        case ErrorCode::OutputIOError: return "OutputIOError";
        case ErrorCode::NonFinite: return "NonFinite";
    }
    return "Unknown";
}

}  // namespace adlab
