#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ctxlake/admissibility.hpp"
#include "ctxlake/types.hpp"

namespace ctxlake {

enum class TraceKind {
    kMeta,
    kRetrieval,
    kDecision,
    kVerdict,
    kPrepare,
    kCommit,
    kAbort,
    kExternalAction,
};

std::string_view trace_kind_name(TraceKind kind);
TraceKind trace_kind_from_name(std::string_view name);

/// One JSONL trace line: kind and time_ms plus per-kind fields. Serialized
/// with sorted keys, so identical runs produce byte-identical traces.
struct TraceEvent {
    TraceKind kind;
    std::uint64_t time_ms = 0;
    nlohmann::json fields = nlohmann::json::object();

    std::string to_line() const;
    static TraceEvent from_line(const std::string& line, std::size_t line_no);
};

nlohmann::json premise_to_json(const PremiseRef& premise);
PremiseRef premise_from_json(const nlohmann::json& j);
nlohmann::json decision_to_json(const DecisionRecord& d);
DecisionRecord decision_from_json(const nlohmann::json& j);

/// In-memory event log with deterministic JSONL rendering.
class TraceLog {
public:
    void append(TraceKind kind, std::uint64_t time_ms, nlohmann::json fields);
    const std::vector<TraceEvent>& events() const { return events_; }
    std::string to_text() const;

    static std::vector<TraceEvent> parse(std::istream& in);
    static std::vector<TraceEvent> parse_text(const std::string& text);

private:
    std::vector<TraceEvent> events_;
};

}  // namespace ctxlake
