#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctxlake/config.hpp"
#include "ctxlake/kernel.hpp"
#include "ctxlake/semantic.hpp"

namespace ctxlake {

/// Visibility policies of independently advancing systems: each decides when
/// durable state becomes visible on its own internal schedule and exposes no
/// way to gate that visibility externally.
enum class LagKind { kReplicaLag, kIndexRefresh, kCacheTtl, kBatchRefresh };

std::string_view lag_kind_name(LagKind kind);
LagKind lag_kind_from_name(std::string_view name);

struct LagPolicy {
    LagKind kind = LagKind::kReplicaLag;
    std::uint64_t parameter_ms = 0;  // delay, refresh period, or TTL
};

/// Mock composition of independently advancing subsystems over one hidden
/// ground-truth kernel. Each subsystem wraps one layer and differs from the
/// kernel only in its visibility policy:
///
///   replica_lag    value as of now - lag
///   index_refresh  value as of the last refresh tick <= now
///   cache_ttl      cached value until expiry, then refreshed
///   batch_refresh  value as of the tick before the last tick (one period of
///                  processing delay)
///
/// No subsystem exposes prepare/commit hooks; writes go to the truth kernel
/// on their own schedule and surface here whenever the policy says so.
class ComposedView {
public:
    explicit ComposedView(const Kernel& truth) : truth_(truth) {}

    void add_subsystem(std::string name, Layer layer, LagPolicy policy);

    struct ReadResult {
        std::optional<Bytes> value;
        CutId cut;  // the causal cut this subsystem actually served
    };

    /// Point read through the named subsystem's visibility policy.
    ReadResult read(std::string_view subsystem, std::string_view key, LogicalTime now);

    struct SearchResult {
        std::vector<SearchHit> hits;
        CutId cut;
    };

    /// Similarity search over the subsystem's visible cut (semantic-scoped
    /// subsystems only).
    SearchResult search(std::string_view subsystem, const EmbeddingVector& query, std::size_t k,
                        LogicalTime now);

    /// Cut the subsystem would serve at `now` (for cache_ttl: the cut a
    /// fresh fill would serve).
    CutId visible_cut(std::string_view subsystem, LogicalTime now) const;

    /// The read-time alternative: derive state at an event-time cut by
    /// folding the recorded state-transition episodes up to `now`. Coherent,
    /// but mutation semantics have degenerated into an append-only log fold;
    /// the store's native state layer plays no part in the answer.
    std::optional<Bytes> event_time_replay_read(std::string_view state_key,
                                                LogicalTime now) const;

private:
    struct CacheEntry {
        std::optional<Bytes> value;
        CutId cut;
        std::uint64_t expires_at_ms = 0;
    };
    struct Subsystem {
        Layer layer;
        LagPolicy policy;
        std::map<std::string, CacheEntry> point_cache;  // cache_ttl only
        CacheEntry corpus_cache;                        // cache_ttl search cut
    };

    Subsystem& find(std::string_view name);
    const Subsystem& find(std::string_view name) const;
    CutId policy_cut(const Subsystem& subsystem, LogicalTime now) const;

    const Kernel& truth_;
    std::map<std::string, Subsystem, std::less<>> subsystems_;
};

struct ComparisonRow {
    std::string mode;
    std::string lag_kind;
    std::uint64_t lag_ms = 0;
    std::uint64_t seed = 0;
    std::uint64_t decisions = 0;
    std::uint64_t coherence_violations = 0;
    std::uint64_t invalid_outcomes = 0;
};

struct ComparisonReport {
    std::string scenario;
    std::vector<ComparisonRow> rows;

    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Runs `base` under both architectures across a lag grid and seed set:
/// composed mode once per (lag, seed), Context Lake mode once per seed (its
/// rows repeat across the grid: the lag knob does not apply to it).
/// Violation counts come from the offline trace analyzer; invalid outcomes
/// from the scenario's ground-truth audit.
ComparisonReport run_comparison(const RunConfig& base, LagKind kind,
                                const std::vector<std::uint64_t>& lag_grid,
                                const std::vector<std::uint64_t>& seeds);

}  // namespace ctxlake
