#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxlake/trace.hpp"

namespace ctxlake {

struct DecisionFinding {
    std::string decision_id;
    std::vector<std::string> violations;
    bool runtime_mismatch = false;
};

struct ViolationReport {
    std::uint64_t decisions = 0;
    std::uint64_t admitted = 0;  // decisions with zero recomputed violations
    std::map<std::string, std::uint64_t> violations_by_code;
    std::vector<DecisionFinding> details;
    std::vector<std::string> anomalies;
    /// Set when the trace had few enough state transactions for the
    /// brute-force serial-equivalence check; nullopt when skipped.
    std::optional<bool> serializable;

    std::uint64_t total_violations() const;
    bool clean() const;
    nlohmann::json to_json() const;
};

/// Offline checker: rebuilds the version history from commit events,
/// recomputes every decision's admissibility from raw premises (independent
/// of the runtime gate), cross-checks recorded retrievals against the
/// rebuilt history (atomic visibility), verifies that rejected decisions
/// left no effects, and brute-forces serial equivalence on small histories.
///
/// Delta and the enabled gate checks come from the trace's meta line unless
/// overridden. One analyzer/gate divergence is expected and deliberate:
/// provenance is checked structurally here (a record must carry a transform
/// id and sources) because the registry is not part of a trace.
ViolationReport analyze(const std::vector<TraceEvent>& events,
                        std::optional<std::uint64_t> delta_override = std::nullopt);

/// Parses JSONL and analyzes; throws ParseError with the line number on
/// malformed input.
ViolationReport analyze_stream(std::istream& jsonl,
                               std::optional<std::uint64_t> delta_override = std::nullopt);

/// True iff the final state equals the final state of some serial
/// permutation of the committed state-layer transactions whose recorded
/// reads are reproduced at their turn. Throws TooManyTransactions above
/// `max_tx` (the oracle enumerates max_tx! permutations).
bool check_serializable(const std::vector<TraceEvent>& events, std::size_t max_tx = 6);

}  // namespace ctxlake
