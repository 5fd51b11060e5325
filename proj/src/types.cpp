#include "ctxlake/types.hpp"

namespace ctxlake {

std::string_view layer_name(Layer layer) {
    switch (layer) {
        case Layer::kEpisodic: return "episodic";
        case Layer::kSemantic: return "semantic";
        case Layer::kState: return "state";
    }
    return "unknown";
}

Layer layer_from_name(std::string_view name) {
    if (name == "episodic") return Layer::kEpisodic;
    if (name == "semantic") return Layer::kSemantic;
    if (name == "state") return Layer::kState;
    throw Error(ErrorCode::kParseError, "unknown layer name '" + std::string(name) + "'");
}

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kUnknownCut: return "UnknownCut";
        case ErrorCode::kTxClosed: return "TxClosed";
        case ErrorCode::kEpisodicRevision: return "EpisodicRevision";
        case ErrorCode::kWriteConflict: return "WriteConflict";
        case ErrorCode::kTransitionRejected: return "TransitionRejected";
        case ErrorCode::kUnregisteredTransform: return "UnregisteredTransform";
        case ErrorCode::kUnknownSourceEpisode: return "UnknownSourceEpisode";
        case ErrorCode::kDuplicateVersion: return "DuplicateVersion";
        case ErrorCode::kEmptyLabelSet: return "EmptyLabelSet";
        case ErrorCode::kOverEnvelope: return "OverEnvelope";
        case ErrorCode::kUnknownSubsystem: return "UnknownSubsystem";
        case ErrorCode::kUnknownScenario: return "UnknownScenario";
        case ErrorCode::kInvalidConfig: return "InvalidConfig";
        case ErrorCode::kParseError: return "ParseError";
        case ErrorCode::kTooManyTransactions: return "TooManyTransactions";
    }
    return "UnknownError";
}

}  // namespace ctxlake
