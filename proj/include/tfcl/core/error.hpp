#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tfcl {

enum class ErrorCode {
    // data ingestion / corpus
    MalformedRow,
    EmptyFile,
    InvalidParams,
    TooFewSubjects,
    InvalidSpec,
    LabelsMissing,
    InsufficientData,
    WindowMismatch,
    BadLabel,
    // signal processing / tensors
    EmptySignal,
    InvalidRange,
    BadShape,
    ShapeMismatch,
    LengthMismatch,
    IndexOutOfRange,
    EmptyPipeline,
    UnknownArch,
    // numerics
    ZeroVector,
    NonfiniteLoss,
    EmptyMatrix,
    Degenerate,
    // persistence
    CorruptManifest,
    SizeMismatch,
    ChecksumMismatch,
    IoError,
    // orchestration
    ConfigInvalid,
    ProvenanceViolation,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedRow: return "MALFORMED_ROW";
        case ErrorCode::EmptyFile: return "EMPTY_FILE";
        case ErrorCode::InvalidParams: return "INVALID_PARAMS";
        case ErrorCode::TooFewSubjects: return "TOO_FEW_SUBJECTS";
        case ErrorCode::InvalidSpec: return "INVALID_SPEC";
        case ErrorCode::LabelsMissing: return "LABELS_MISSING";
        case ErrorCode::InsufficientData: return "INSUFFICIENT_DATA";
        case ErrorCode::WindowMismatch: return "WINDOW_MISMATCH";
        case ErrorCode::BadLabel: return "BAD_LABEL";
        case ErrorCode::EmptySignal: return "EMPTY_SIGNAL";
        case ErrorCode::InvalidRange: return "INVALID_RANGE";
        case ErrorCode::BadShape: return "BAD_SHAPE";
        case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
        case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
        case ErrorCode::IndexOutOfRange: return "INDEX_OUT_OF_RANGE";
        case ErrorCode::EmptyPipeline: return "EMPTY_PIPELINE";
        case ErrorCode::UnknownArch: return "UNKNOWN_ARCH";
        case ErrorCode::ZeroVector: return "ZERO_VECTOR";
        case ErrorCode::NonfiniteLoss: return "NONFINITE_LOSS";
        case ErrorCode::EmptyMatrix: return "EMPTY_MATRIX";
        case ErrorCode::Degenerate: return "DEGENERATE";
        case ErrorCode::CorruptManifest: return "CORRUPT_MANIFEST";
        case ErrorCode::SizeMismatch: return "SIZE_MISMATCH";
        case ErrorCode::ChecksumMismatch: return "CHECKSUM_MISMATCH";
        case ErrorCode::IoError: return "IO_ERROR";
        case ErrorCode::ConfigInvalid: return "CONFIG_INVALID";
        case ErrorCode::ProvenanceViolation: return "PROVENANCE_VIOLATION";
    }
    return "UNKNOWN";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

    ErrorCode code() const noexcept { return code_; }
    /// Message without the code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) fail(code, what);
}

}  // namespace tfcl
