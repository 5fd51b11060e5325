#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxlake/clock.hpp"
#include "ctxlake/config.hpp"
#include "ctxlake/envelope.hpp"
#include "ctxlake/trace.hpp"

namespace ctxlake {

/// Deterministic discrete-event scheduler. Events fire in (time, insertion
/// sequence) order; the simulated clock advances monotonically to each
/// event's time. Identical schedules replay identically.
class Scheduler {
public:
    explicit Scheduler(SimulatedClock& clock) : clock_(clock) {}

    void at(std::uint64_t time_ms, std::function<void()> fn);

    struct StepInfo {
        std::uint64_t time_ms = 0;
        std::uint64_t sequence = 0;
    };

    /// Executes exactly one event; nullopt when the queue is empty.
    std::optional<StepInfo> step();
    void run();
    bool empty() const { return queue_.empty(); }
    LogicalTime now() const { return clock_.now(); }

private:
    struct Item {
        std::uint64_t time_ms;
        std::uint64_t sequence;
        mutable std::function<void()> fn;
        bool operator<(const Item& other) const {
            if (time_ms != other.time_ms) return time_ms < other.time_ms;
            return sequence < other.sequence;
        }
    };

    SimulatedClock& clock_;
    std::multiset<Item> queue_;
    std::uint64_t next_sequence_ = 0;
};

struct InvalidOutcome {
    std::string decision_id;
    std::string reason;
};

/// Ground-truth audit counters for the four degraded-configuration failure
/// modes. A full Context Lake configuration run reports all zeros.
struct Symptoms {
    std::uint64_t stale_coherent_invalid = 0;   // admitted decisions wrong vs decision-time truth
    std::uint64_t envelope_window_misses = 0;   // decisions whose premises aged past delta under load
    std::uint64_t mixed_cut_decisions = 0;      // decisions whose premises span causal cuts
    std::uint64_t divergent_interpretations = 0;  // conflicting conclusions from identical data

    bool any() const {
        return stale_coherent_invalid || envelope_window_misses || mixed_cut_decisions ||
               divergent_interpretations;
    }
    nlohmann::json to_json() const;
};

struct RunResult {
    RunConfig config;
    std::vector<TraceEvent> trace;
    EnvelopeMetrics metrics;
    std::vector<InvalidOutcome> invalid_outcomes;
    Symptoms symptoms;

    /// Layer contents at the final cut, keyed by store key.
    std::map<std::string, Bytes> final_episodic;
    std::map<std::string, Bytes> final_semantic;
    std::map<std::string, Bytes> final_state;

    /// JSONL rendering of the trace; byte-identical across runs with the
    /// same (scenario, config, seed).
    std::string trace_text() const;
};

/// Optional persistence for a scenario run: the kernel's episodic JSONL log
/// and the memory store's transformation log.
struct PersistPaths {
    std::filesystem::path episodic_log;
    std::filesystem::path transform_log;
};

/// Runs one registered scenario (warehouse, checkout, load_sweep,
/// failure_matrix) under either architecture and returns the full trace plus
/// the ground-truth audit. Throws UnknownScenario / InvalidConfig.
RunResult run_scenario(const RunConfig& config, const PersistPaths* persist = nullptr);

class TransformationRegistry;

/// Registers the transformations a scenario uses, so its persisted logs can
/// be rebuilt into a fresh store.
void register_scenario_transformations(const std::string& scenario,
                                       TransformationRegistry& registry);

}  // namespace ctxlake
