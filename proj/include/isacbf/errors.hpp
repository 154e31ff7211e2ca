#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isacbf {

enum class ErrorCode {
    DimensionMismatch,
    InvalidArgument,
    InvalidStatistics,
    SingularFim,
    IndefiniteNumerator,
    ZeroDesiredGain,
    SingularCoupling,
    QuadratureOrderTooSmall,
    ZeroChannel,
    NoFeasiblePoint,
    PerturbationInadmissible,
    Infeasible,
    ParseError,
    ValidationError,
    MissingArtifact,
};

inline std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidStatistics: return "InvalidStatistics";
    case ErrorCode::SingularFim: return "SingularFIM";
    case ErrorCode::IndefiniteNumerator: return "IndefiniteNumerator";
    case ErrorCode::ZeroDesiredGain: return "ZeroDesiredGain";
    case ErrorCode::SingularCoupling: return "SingularCoupling";
    case ErrorCode::QuadratureOrderTooSmall: return "QuadratureOrderTooSmall";
    case ErrorCode::ZeroChannel: return "ZeroChannel";
    case ErrorCode::NoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorCode::PerturbationInadmissible: return "PerturbationInadmissible";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    }
    return "Unknown";
}

/// Library-wide exception. The code identifies the failure class so callers
/// (the CLI in particular) can map it to exit statuses without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// ValidationError carrying the offending config field path (e.g. "sensing.priorStdDeg").
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(ErrorCode::ValidationError, field + ": " + what)
        , field_(std::move(field))
    {
    }

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const char* message)
{
    if (!condition) throw Error(code, message);
}

} // namespace detail

} // namespace isacbf
