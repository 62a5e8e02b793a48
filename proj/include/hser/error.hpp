#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hser {

enum class ErrorKind {
    FileNotFound,
    UnsupportedFormat,
    EmptySignal,
    SignalTooShort,
    EmptySeries,
    MissingStats,
    TooFewSamples,
    DegenerateLabels,
    NonFinite,
    SchemaError,
    MissingEvidence,
    EmptyRules,
    Timeout,
    TransportError,
    RateLimited,
    EmptyGeneration,
    IdMismatch,
    VersionConflict,
    InvalidTable,
    LengthMismatch,
    Empty,
    MissingGold,
    DuplicateId,
    ManifestError,
    IoError,
    ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::FileNotFound: return "FileNotFound";
        case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorKind::EmptySignal: return "EmptySignal";
        case ErrorKind::SignalTooShort: return "SignalTooShort";
        case ErrorKind::EmptySeries: return "EmptySeries";
        case ErrorKind::MissingStats: return "MissingStats";
        case ErrorKind::TooFewSamples: return "TooFewSamples";
        case ErrorKind::DegenerateLabels: return "DegenerateLabels";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::MissingEvidence: return "MissingEvidence";
        case ErrorKind::EmptyRules: return "EmptyRules";
        case ErrorKind::Timeout: return "Timeout";
        case ErrorKind::TransportError: return "TransportError";
        case ErrorKind::RateLimited: return "RateLimited";
        case ErrorKind::EmptyGeneration: return "EmptyGeneration";
        case ErrorKind::IdMismatch: return "IdMismatch";
        case ErrorKind::VersionConflict: return "VersionConflict";
        case ErrorKind::InvalidTable: return "InvalidTable";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::Empty: return "Empty";
        case ErrorKind::MissingGold: return "MissingGold";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::ManifestError: return "ManifestError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Errors raised while talking to an LLM endpoint remember which sample they belong to.
class LlmError : public Error {
public:
    LlmError(ErrorKind kind, const std::string& message, std::string sample_id = {})
        : Error(kind, message), sample_id_(std::move(sample_id)) {}

    const std::string& sample_id() const noexcept { return sample_id_; }

private:
    std::string sample_id_;
};

}  // namespace hser
