#include "ctxlake/trace.hpp"

#include <sstream>

namespace ctxlake {

namespace {

using nlohmann::json;

std::string_view effect_kind_name(Effect::Kind kind) {
    switch (kind) {
        case Effect::Kind::kStateWrite: return "state_write";
        case Effect::Kind::kSemanticWrite: return "semantic_write";
        case Effect::Kind::kEpisodeAppend: return "episode_append";
        case Effect::Kind::kExternalAction: return "external_action";
    }
    return "unknown";
}

Effect::Kind effect_kind_from_name(std::string_view name) {
    if (name == "state_write") return Effect::Kind::kStateWrite;
    if (name == "semantic_write") return Effect::Kind::kSemanticWrite;
    if (name == "episode_append") return Effect::Kind::kEpisodeAppend;
    if (name == "external_action") return Effect::Kind::kExternalAction;
    throw Error(ErrorCode::kParseError, "unknown effect kind '" + std::string(name) + "'");
}

}  // namespace

std::string_view trace_kind_name(TraceKind kind) {
    switch (kind) {
        case TraceKind::kMeta: return "meta";
        case TraceKind::kRetrieval: return "retrieval";
        case TraceKind::kDecision: return "decision";
        case TraceKind::kVerdict: return "verdict";
        case TraceKind::kPrepare: return "prepare";
        case TraceKind::kCommit: return "commit";
        case TraceKind::kAbort: return "abort";
        case TraceKind::kExternalAction: return "external_action";
    }
    return "unknown";
}

TraceKind trace_kind_from_name(std::string_view name) {
    if (name == "meta") return TraceKind::kMeta;
    if (name == "retrieval") return TraceKind::kRetrieval;
    if (name == "decision") return TraceKind::kDecision;
    if (name == "verdict") return TraceKind::kVerdict;
    if (name == "prepare") return TraceKind::kPrepare;
    if (name == "commit") return TraceKind::kCommit;
    if (name == "abort") return TraceKind::kAbort;
    if (name == "external_action") return TraceKind::kExternalAction;
    throw Error(ErrorCode::kParseError, "unknown trace kind '" + std::string(name) + "'");
}

std::string TraceEvent::to_line() const {
    json line = fields;
    line["kind"] = std::string(trace_kind_name(kind));
    line["time_ms"] = time_ms;
    return line.dump();
}

TraceEvent TraceEvent::from_line(const std::string& line, std::size_t line_no) {
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": not a JSON object");
    }
    TraceEvent event;
    try {
        event.kind = trace_kind_from_name(obj.at("kind").get<std::string>());
        event.time_ms = obj.at("time_ms").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_no) + ": " + e.what());
    }
    obj.erase("kind");
    obj.erase("time_ms");
    event.fields = std::move(obj);
    return event;
}

json premise_to_json(const PremiseRef& premise) {
    return {{"layer", std::string(layer_name(premise.layer))},
            {"key", premise.key},
            {"cut", premise.cut.value},
            {"retrieved_at_ms", premise.retrieved_at.millis},
            {"premise_kind", premise.kind == PremiseKind::kSemantic ? "semantic" : "base"}};
}

PremiseRef premise_from_json(const json& j) {
    PremiseRef premise;
    premise.layer = layer_from_name(j.at("layer").get<std::string>());
    premise.key = j.at("key").get<std::string>();
    premise.cut = CutId{j.at("cut").get<std::uint64_t>()};
    premise.retrieved_at = LogicalTime{j.at("retrieved_at_ms").get<std::uint64_t>()};
    premise.kind = j.at("premise_kind").get<std::string>() == "semantic" ? PremiseKind::kSemantic
                                                                         : PremiseKind::kBase;
    return premise;
}

json decision_to_json(const DecisionRecord& d) {
    json premises = json::array();
    for (const PremiseRef& premise : d.premises) premises.push_back(premise_to_json(premise));
    json effects = json::array();
    for (const Effect& effect : d.effects) {
        effects.push_back({{"kind", std::string(effect_kind_name(effect.kind))},
                           {"target", effect.target}});
    }
    return {{"decision_id", d.decision_id},
            {"agent", d.agent_id},
            {"premises", std::move(premises)},
            {"opaque_context_declared", d.opaque_context_declared},
            {"decided_at_ms", d.decided_at.millis},
            {"effects", std::move(effects)},
            {"shared_effects", d.shared_effects}};
}

DecisionRecord decision_from_json(const json& j) {
    DecisionRecord d;
    d.decision_id = j.at("decision_id").get<std::string>();
    d.agent_id = j.at("agent").get<std::string>();
    for (const json& premise : j.at("premises")) d.premises.push_back(premise_from_json(premise));
    d.opaque_context_declared = j.at("opaque_context_declared").get<bool>();
    d.decided_at = LogicalTime{j.at("decided_at_ms").get<std::uint64_t>()};
    for (const json& effect : j.at("effects")) {
        d.effects.push_back({effect_kind_from_name(effect.at("kind").get<std::string>()),
                             effect.at("target").get<std::string>()});
    }
    d.shared_effects = j.at("shared_effects").get<bool>();
    return d;
}

void TraceLog::append(TraceKind kind, std::uint64_t time_ms, json fields) {
    events_.push_back(TraceEvent{kind, time_ms, std::move(fields)});
}

std::string TraceLog::to_text() const {
    std::string out;
    for (const TraceEvent& event : events_) {
        out += event.to_line();
        out += '\n';
    }
    return out;
}

std::vector<TraceEvent> TraceLog::parse(std::istream& in) {
    std::vector<TraceEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        events.push_back(TraceEvent::from_line(line, line_no));
    }
    return events;
}

std::vector<TraceEvent> TraceLog::parse_text(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

}  // namespace ctxlake
