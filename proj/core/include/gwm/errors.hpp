#pragma once

#include <stdexcept>
#include <string>

namespace gwm {

// Every failure mode the library can signal. Codes are stable identifiers;
// messages carry the offending ids/values.
enum class Errc {
    // graph state
    DuplicateId,
    EmptyNode,
    DanglingEndpoint,
    DuplicateEdge,
    UnknownEdgeType,
    UnknownNode,
    UnknownEdge,
    // edge builder
    MissingEmbedding,
    DegenerateK,
    AsymmetricInput,
    // embedding assembly / propagation / projector
    EmbedderUnavailable,
    DimensionMismatch,
    ShapeMismatch,
    StaleEmbedding,
    ScopeUnresolved,
    NonFiniteLoss,
    // token-level message passing
    CenterMissing,
    MissingUnifiedText,
    BudgetTooSmallForCenter,
    CaptionerUnavailable,
    // actions
    UnresolvedRef,
    EmptyGraph,
    MissingSlot,
    UnknownTemplate,
    // transitions
    StaleTransition,
    // decoder clients
    DecoderUnavailable,
    BadResponse,
    Overloaded,
    UnparseableResponse,
    // task adapters
    EmptyDocument,
    DanglingInteraction,
    DegenerateFixture,
    // persistence and config
    IoError,
    SchemaViolation,
    UnknownConfigKey,
    InvalidConfigValue,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
    throw Error(code, message);
}

inline const char* errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::EmptyNode: return "EmptyNode";
        case Errc::DanglingEndpoint: return "DanglingEndpoint";
        case Errc::DuplicateEdge: return "DuplicateEdge";
        case Errc::UnknownEdgeType: return "UnknownEdgeType";
        case Errc::UnknownNode: return "UnknownNode";
        case Errc::UnknownEdge: return "UnknownEdge";
        case Errc::MissingEmbedding: return "MissingEmbedding";
        case Errc::DegenerateK: return "DegenerateK";
        case Errc::AsymmetricInput: return "AsymmetricInput";
        case Errc::EmbedderUnavailable: return "EmbedderUnavailable";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::StaleEmbedding: return "StaleEmbedding";
        case Errc::ScopeUnresolved: return "ScopeUnresolved";
        case Errc::NonFiniteLoss: return "NonFiniteLoss";
        case Errc::CenterMissing: return "CenterMissing";
        case Errc::MissingUnifiedText: return "MissingUnifiedText";
        case Errc::BudgetTooSmallForCenter: return "BudgetTooSmallForCenter";
        case Errc::CaptionerUnavailable: return "CaptionerUnavailable";
        case Errc::UnresolvedRef: return "UnresolvedRef";
        case Errc::EmptyGraph: return "EmptyGraph";
        case Errc::MissingSlot: return "MissingSlot";
        case Errc::UnknownTemplate: return "UnknownTemplate";
        case Errc::StaleTransition: return "StaleTransition";
        case Errc::DecoderUnavailable: return "DecoderUnavailable";
        case Errc::BadResponse: return "BadResponse";
        case Errc::Overloaded: return "Overloaded";
        case Errc::UnparseableResponse: return "UnparseableResponse";
        case Errc::EmptyDocument: return "EmptyDocument";
        case Errc::DanglingInteraction: return "DanglingInteraction";
        case Errc::DegenerateFixture: return "DegenerateFixture";
        case Errc::IoError: return "IoError";
        case Errc::SchemaViolation: return "SchemaViolation";
        case Errc::UnknownConfigKey: return "UnknownConfigKey";
        case Errc::InvalidConfigValue: return "InvalidConfigValue";
    }
    return "UnknownError";
}

} // namespace gwm
