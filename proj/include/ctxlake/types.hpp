#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ctxlake {

/// Opaque byte-string. Keys use layer-local text namespaces ("inv:SKU1");
/// values are arbitrary bytes (structured records are JSON text, base64-wrapped
/// when embedded in JSONL files).
using Bytes = std::string;

/// Identifier of one causal cut of the whole store: the state produced by
/// commits 1..value. Cut 0 is the empty store. Strictly increasing, never
/// reused.
struct CutId {
    std::uint64_t value = 0;

    friend auto operator<=>(const CutId&, const CutId&) = default;
};

/// Logical milliseconds from an injected clock source. Non-decreasing per
/// clock. Houses both decision_time and retrieval_time values.
struct LogicalTime {
    std::uint64_t millis = 0;

    friend auto operator<=>(const LogicalTime&, const LogicalTime&) = default;
};

/// The three memory layers. Each layer is an independent keyspace with its own
/// mutability contract: episodic is append-only, semantic is
/// transformation-governed, state is transactionally mutable.
enum class Layer {
    kEpisodic,
    kSemantic,
    kState,
};

std::string_view layer_name(Layer layer);
Layer layer_from_name(std::string_view name);

enum class ErrorCode {
    kUnknownCut,
    kTxClosed,
    kEpisodicRevision,
    kWriteConflict,
    kTransitionRejected,
    kUnregisteredTransform,
    kUnknownSourceEpisode,
    kDuplicateVersion,
    kEmptyLabelSet,
    kOverEnvelope,
    kUnknownSubsystem,
    kUnknownScenario,
    kInvalidConfig,
    kParseError,
    kTooManyTransactions,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ctxlake
