#pragma once

#include <stdexcept>
#include <string>

namespace adlab {

// Failure categories double as reason codes in per-replication records.
enum class ErrorCode {
    InvalidArgument,
    SingularSystem,
    NonConvergence,
    InvalidSpec,
    EmptyCandidates,
    DegenerateDof,
    ZeroSignal,
    NotUnitNorm,
    IdentificationFailure,
    TooFewSamples,
    ConfigError,
    DataError,
    OutputIOError,
    NonFinite,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

template <ErrorCode C>
class TypedError : public Error {
public:
    explicit TypedError(const std::string& what) : Error(C, what) {}
};

using InvalidArgument = TypedError<ErrorCode::InvalidArgument>;
using SingularSystem = TypedError<ErrorCode::SingularSystem>;
using NonConvergence = TypedError<ErrorCode::NonConvergence>;
using InvalidSpec = TypedError<ErrorCode::InvalidSpec>;
using EmptyCandidates = TypedError<ErrorCode::EmptyCandidates>;
using DegenerateDof = TypedError<ErrorCode::DegenerateDof>;
using ZeroSignal = TypedError<ErrorCode::ZeroSignal>;
using NotUnitNorm = TypedError<ErrorCode::NotUnitNorm>;
using IdentificationFailure = TypedError<ErrorCode::IdentificationFailure>;
using TooFewSamples = TypedError<ErrorCode::TooFewSamples>;
using ConfigError = TypedError<ErrorCode::ConfigError>;
using DataError = TypedError<ErrorCode::DataError>;
using OutputIOError = TypedError<ErrorCode::OutputIOError>;

}  // namespace adlab
