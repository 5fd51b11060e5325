#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxlake/kernel.hpp"

namespace ctxlake {

class TransformationRegistry;

/// Immutable, sequence-numbered raw observation. Never revised: corrections
/// appear as new episodes referencing the corrected seq in their payload.
struct Episode {
    std::uint64_t seq = 0;
    LogicalTime observed_at;
    std::string source;
    Bytes payload;
};

/// Versioned interpretation with provenance. Writable only through a
/// registered transformation.
struct SemanticRecord {
    std::string key;
    Bytes interpretation;
    std::string transform_id;
    std::uint32_t transform_version = 0;
    std::vector<std::uint64_t> sources;  // episode seqs
    CutId produced_at_cut;               // filled on read; ignored on write
};

/// Guarded state update: the precondition is evaluated against the
/// transaction's snapshot view, registered validation hooks run again at
/// commit. A missing next value deletes the key.
struct StateTransition {
    std::function<bool(const std::optional<Bytes>&)> precondition;
    std::optional<Bytes> next;
};

/// Per-key-prefix state validation hook; a returned string rejects the
/// commit.
using StateValidator = std::function<std::optional<std::string>(
    std::string_view key, const std::optional<Bytes>& old_value,
    const std::optional<Bytes>& new_value)>;

/// One line of the transformation log.
struct TransformLogEntry {
    std::string transform_id;
    std::uint32_t version = 0;
    std::vector<std::uint64_t> input_seqs;
    std::vector<std::string> output_keys;
    CutId committed_cut;
};

struct MemoryOptions {
    /// When set, any semantic write that does not carry a registered
    /// (transform_id, version) provenance is rejected at commit, including
    /// writes that bypass write_semantic(). Disabled only by the degraded
    /// scenario configurations that model systems without governed
    /// semantics.
    bool enforce_semantic_authority = true;
};

struct RebuildStats {
    std::size_t episodes = 0;
    std::size_t transformations = 0;
};

/// The three memory-layer contracts on top of the kernel: append-only
/// episodic observations, transformation-governed semantic interpretations,
/// and validated state transitions. State transitions are recorded as
/// episodes in the same transaction, so episodic log + transformation log
/// replay reconstructs the semantic and state layers exactly.
class MemoryStore {
public:
    MemoryStore(Kernel& kernel, const Clock& clock, const TransformationRegistry& registry,
                MemoryOptions options = {});

    Kernel& kernel() { return kernel_; }
    const Kernel& kernel() const { return kernel_; }

    // --- episodic -------------------------------------------------------------

    /// Appends and commits one observation. Durable and immediately visible
    /// after its commit; seq is the previous maximum plus one.
    std::uint64_t append_episode(std::string_view source, LogicalTime observed_at, Bytes payload);

    /// Buffers an observation inside a caller-owned transaction.
    std::uint64_t append_episode_in(Transaction& tx, std::string_view source,
                                    LogicalTime observed_at, Bytes payload);

    /// Records a decision effect that takes place in the external world, so
    /// traces and audits can account for it.
    std::uint64_t append_external_action(Transaction& tx, std::string_view decision_id,
                                         std::string_view agent_id, std::string_view action,
                                         LogicalTime at);

    std::optional<Episode> episode(CutId cut, std::uint64_t seq) const;
    std::uint64_t max_seq() const { return next_seq_.load() - 1; }

    static std::string episodic_key(std::uint64_t seq);
    static std::optional<Episode> decode_episode(std::string_view key, const Bytes& value);

    // --- semantic -------------------------------------------------------------

    /// Buffers a semantic record; visible only at commit. The record must
    /// carry a registered (transform_id, version) and sources that resolve
    /// to existing episodes.
    void write_semantic(Transaction& tx, const SemanticRecord& record);

    std::optional<SemanticRecord> read_semantic(CutId cut, std::string_view key) const;
    static std::optional<SemanticRecord> decode_semantic(std::string_view key, const Bytes& value);

    // --- state ------------------------------------------------------------------

    /// Buffers a guarded state write plus the state-transition episode that
    /// makes it replayable. Throws TransitionRejected if the precondition
    /// fails against the snapshot view.
    void update_state(Transaction& tx, std::string_view key, const StateTransition& transition,
                      std::string_view actor);

    void register_state_validator(std::string key_prefix, StateValidator validator);

    // --- transformation log & rebuild ------------------------------------------

    void set_transform_log(const std::filesystem::path& path);
    void log_transformation(const TransformLogEntry& entry);
    static std::vector<TransformLogEntry> read_transform_log(const std::filesystem::path& path);

    /// Replays an episodic JSONL file and a transformation log into this
    /// store (which must be fresh and have no logs attached). Episodes are
    /// re-appended in file order, applying recorded state transitions;
    /// transformations are re-run in log order via the registry.
    RebuildStats rebuild_from_logs(const std::filesystem::path& episodic_log,
                                   const std::filesystem::path& transform_log);

private:
    void install_validators();
    std::uint64_t buffer_episode(Transaction& tx, std::string_view source, LogicalTime observed_at,
                                 const Bytes& payload);

    Kernel& kernel_;
    const Clock& clock_;
    const TransformationRegistry& registry_;
    MemoryOptions options_;

    std::atomic<std::uint64_t> next_seq_{1};

    mutable std::mutex mutex_;  // state validators and transform log stream
    std::vector<std::pair<std::string, StateValidator>> state_validators_;
    std::unique_ptr<std::ofstream> transform_log_;
};

}  // namespace ctxlake
