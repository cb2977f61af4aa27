#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace storyline {

/// Machine-readable error codes. The service maps these onto HTTP statuses
/// and echoes them in error payloads.
enum class ErrorCode {
    Io,
    Parse,
    DuplicateId,
    InvalidArgument,
    SingleClass,
    DuplicateVote,
    DimensionMismatch,
    MissingFeatures,
    VersionMismatch,
    LayoutMismatch,
    EmptyCorpus,
    NoCandidates,
    EmptySegment,
    InvalidPin,
    SolverBudget,
    NotFound,
    Conflict,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Io: return "IO_ERROR";
    case ErrorCode::Parse: return "PARSE_ERROR";
    case ErrorCode::DuplicateId: return "DUPLICATE_ID";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::SingleClass: return "SINGLE_CLASS";
    case ErrorCode::DuplicateVote: return "DUPLICATE_VOTE";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::MissingFeatures: return "MISSING_FEATURES";
    case ErrorCode::VersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::LayoutMismatch: return "LAYOUT_MISMATCH";
    case ErrorCode::EmptyCorpus: return "EMPTY_CORPUS";
    case ErrorCode::NoCandidates: return "NO_CANDIDATES";
    case ErrorCode::EmptySegment: return "EMPTY_SEGMENT";
    case ErrorCode::InvalidPin: return "INVALID_PIN";
    case ErrorCode::SolverBudget: return "SOLVER_BUDGET";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::Conflict: return "CONFLICT";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), m_code(code) {}
    Error(ErrorCode code, const std::string& message, std::vector<std::size_t> segments)
        : std::runtime_error(message), m_code(code), m_segments(std::move(segments)) {}

    ErrorCode code() const noexcept { return m_code; }
    /// Story segments (0-based) the error refers to, if any.
    const std::vector<std::size_t>& segments() const noexcept { return m_segments; }

  private:
    ErrorCode m_code;
    std::vector<std::size_t> m_segments;
};

}  // namespace storyline
