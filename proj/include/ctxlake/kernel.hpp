#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxlake/clock.hpp"
#include "ctxlake/types.hpp"

namespace ctxlake {

/// Log metadata carried by episodic writes; surfaces in the episodic JSONL
/// file as the seq and time_ms fields.
struct EpisodicMeta {
    std::uint64_t seq = 0;
    std::uint64_t time_ms = 0;
};

/// One buffered write. A missing value is a tombstone (state/semantic layers
/// only; the episodic layer has no deletion).
struct PendingWrite {
    Layer layer;
    std::string key;
    std::optional<Bytes> value;
    std::optional<EpisodicMeta> episodic_meta;
};

/// Snapshot-isolated transaction handle. All reads resolve against the
/// snapshot cut taken at begin_tx(), plus the transaction's own earlier
/// writes. Writes stay invisible to every other reader until commit.
class Transaction {
public:
    enum class Status { kOpen, kPrepared, kCommitted, kAborted };

    Transaction(const Transaction&) = delete;
    Transaction& operator=(const Transaction&) = delete;
    Transaction(Transaction&&) = default;
    Transaction& operator=(Transaction&&) = default;

    std::uint64_t id() const { return id_; }
    CutId snapshot() const { return snapshot_; }
    Status status() const { return status_; }
    const std::set<std::pair<Layer, std::string>>& read_set() const { return read_set_; }
    const std::vector<PendingWrite>& write_set() const { return writes_; }

private:
    friend class Kernel;
    Transaction(std::uint64_t id, CutId snapshot) : id_(id), snapshot_(snapshot) {}

    std::uint64_t id_;
    CutId snapshot_;
    Status status_ = Status::kOpen;
    std::set<std::pair<Layer, std::string>> read_set_;
    std::vector<PendingWrite> writes_;
};

/// Handle to a durably staged (prepared) transaction. The staged writes are
/// held by the kernel, invisible to all readers, until commit or abort.
struct PrepareToken {
    std::uint64_t tx_id = 0;
};

/// Validation hook run at commit for each write of a given layer. Returning
/// a string rejects the whole commit with TransitionRejected.
using CommitValidator = std::function<std::optional<std::string>(
    std::string_view key, const std::optional<Bytes>& old_value,
    const std::optional<Bytes>& new_value)>;

/// Predicate used by scans; evaluated against values as of the scanned cut.
using ScanPredicate = std::function<bool(std::string_view key, const Bytes& value)>;

/// Multi-version store over the three memory layers.
///
/// Reads are pure functions of (cut, layer, key): a snapshot taken at cut k
/// sees exactly the effects of commits 1..k, forever. Commits are linearized
/// through a single commit point; the linearization order defines CutId
/// order. Write-write conflicts on the state and semantic layers are
/// resolved first-committer-wins. The episodic layer is append-only: a key,
/// once committed, can never be rewritten or deleted.
///
/// Concurrency contract: snapshot reads take a shared lock and never block
/// each other; prepare() buffers kernel-side without touching the version
/// store, so context preparation never blocks decision-time reads. commit()
/// briefly takes the store exclusively to apply its writes; no reader can
/// observe a proper subset of a commit's writes at any cut.
class Kernel {
public:
    explicit Kernel(const Clock& clock);
    ~Kernel();

    // --- snapshot reads -----------------------------------------------------

    /// CutId of the latest committed state. Repeated calls without
    /// intervening commits return the same value.
    CutId begin_snapshot() const;

    /// Value visible at `cut`, or nullopt. Throws UnknownCut if cut is ahead
    /// of the latest commit.
    std::optional<Bytes> read(CutId cut, Layer layer, std::string_view key) const;

    /// All live (key, value) pairs at `cut` with begin <= key < end, in
    /// lexicographic key order. Empty `end` means unbounded. The predicate,
    /// if any, is evaluated against values at that cut.
    std::vector<std::pair<std::string, Bytes>> scan(CutId cut, Layer layer,
                                                    std::string_view begin = {},
                                                    std::string_view end = {},
                                                    const ScanPredicate& predicate = {}) const;

    /// Range scan over keys sharing `prefix`.
    std::vector<std::pair<std::string, Bytes>> scan_prefix(
        CutId cut, Layer layer, std::string_view prefix,
        const ScanPredicate& predicate = {}) const;

    /// Full live contents of one layer at `cut` (tombstoned keys excluded).
    std::map<std::string, Bytes> layer_contents(CutId cut, Layer layer) const;

    /// Commit cut at which the version visible at `cut` became visible, or
    /// nullopt if nothing is visible there.
    std::optional<CutId> version_start(CutId cut, Layer layer, std::string_view key) const;

    // --- transactions ---------------------------------------------------------

    Transaction begin_tx() const;

    /// Resolves against tx.snapshot plus the tx's own earlier writes.
    std::optional<Bytes> tx_read(Transaction& tx, Layer layer, std::string_view key) const;

    /// Buffers a write, invisible to everyone until commit. Episodic writes
    /// must target fresh keys: rewriting an existing episodic key throws
    /// EpisodicRevision.
    void tx_write(Transaction& tx, Layer layer, std::string_view key, Bytes value);

    /// Episodic write carrying the seq/time_ms metadata recorded in the
    /// episodic JSONL file.
    void tx_write_episodic(Transaction& tx, std::string_view key, Bytes value,
                           std::uint64_t seq, std::uint64_t time_ms);

    /// Buffers a tombstone. Deletion is not defined for the episodic layer.
    void tx_remove(Transaction& tx, Layer layer, std::string_view key);

    /// Durably stages the transaction's writes kernel-side, still invisible
    /// to every reader.
    PrepareToken prepare(Transaction& tx);

    /// Atomically makes all staged writes visible at one new CutId. There is
    /// no cut at which only a subset of them is visible. Throws WriteConflict
    /// if another transaction committed an overlapping state/semantic key
    /// after tx.snapshot (first committer wins), TransitionRejected if a
    /// commit validator vetoes, EpisodicRevision if an episodic key was
    /// concurrently taken. A failed commit leaves no visible trace.
    CutId commit(const PrepareToken& token);

    /// Discards staged writes with no visible trace.
    void abort(const PrepareToken& token);

    /// prepare + commit, updating the handle's status.
    CutId commit_tx(Transaction& tx);

    /// prepare + abort for an open transaction, updating the handle's status.
    void abort_tx(Transaction& tx);

    // --- history ---------------------------------------------------------------

    CutId latest() const { return begin_snapshot(); }

    /// Logical time at which `cut` was committed. Cut 0 maps to time 0.
    LogicalTime commit_time(CutId cut) const;

    /// Largest cut whose commit time is <= t (CutId 0 if none). Commit times
    /// are non-decreasing because the clock is monotone and commits are
    /// serialized.
    CutId cut_at_or_before(LogicalTime t) const;

    // --- hooks & persistence ----------------------------------------------------

    /// Installs a commit-time validator for one layer. Used by the memory
    /// layer module to enforce state transition rules.
    void set_commit_validator(Layer layer, CommitValidator validator);

    /// Opens (appending) the episodic JSONL log. Every committed episodic
    /// write is persisted as one line {seq, time_ms, key, value_b64} in
    /// commit order.
    void set_episodic_log(const std::filesystem::path& path);

    /// Replays an episodic JSONL file into this kernel, one commit per line.
    /// Returns the number of entries applied. Replaying a log into a fresh
    /// kernel reconstructs the episodic layer bit-exactly.
    std::size_t replay_episodic_log(const std::filesystem::path& path);

private:
    struct Version {
        std::optional<Bytes> value;  // nullopt = tombstone
        std::uint64_t from = 0;      // first cut at which this version is visible
        std::optional<std::uint64_t> to;  // first cut at which it no longer is
    };
    using Chain = std::vector<Version>;
    using LayerMap = std::map<std::string, Chain>;

    struct StagedTx {
        CutId snapshot;
        std::vector<PendingWrite> writes;
    };

    const LayerMap& layer_map(Layer layer) const {
        return layers_[static_cast<std::size_t>(layer)];
    }
    LayerMap& layer_map(Layer layer) { return layers_[static_cast<std::size_t>(layer)]; }

    // Value of `key` at `cut`; callers hold store_mutex_.
    std::optional<Bytes> read_locked(CutId cut, Layer layer, std::string_view key) const;
    bool episodic_key_exists_locked(std::string_view key) const;
    CutId apply_staged(std::uint64_t tx_id, StagedTx&& staged);

    const Clock& clock_;

    mutable std::shared_mutex store_mutex_;
    std::array<LayerMap, 3> layers_;
    std::atomic<std::uint64_t> latest_cut_{0};
    std::vector<std::uint64_t> commit_times_ms_{0};  // indexed by cut, cut 0 at time 0

    std::mutex commit_mutex_;  // single commit point; also guards prepared_ and the log file
    std::map<std::uint64_t, StagedTx> prepared_;
    std::array<CommitValidator, 3> validators_;
    std::unique_ptr<std::ofstream> episodic_log_;

    mutable std::atomic<std::uint64_t> next_tx_id_{1};
};

}  // namespace ctxlake
