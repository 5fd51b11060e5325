#include "ctxlake/composed.hpp"

#include <sstream>

#include "ctxlake/analyzer.hpp"
#include "ctxlake/base64.hpp"
#include "ctxlake/memory.hpp"
#include "ctxlake/scenario.hpp"

namespace ctxlake {

namespace {

using nlohmann::json;

}  // namespace

std::string_view lag_kind_name(LagKind kind) {
    switch (kind) {
        case LagKind::kReplicaLag: return "replica";
        case LagKind::kIndexRefresh: return "index";
        case LagKind::kCacheTtl: return "cache";
        case LagKind::kBatchRefresh: return "batch";
    }
    return "unknown";
}

LagKind lag_kind_from_name(std::string_view name) {
    if (name == "replica") return LagKind::kReplicaLag;
    if (name == "index") return LagKind::kIndexRefresh;
    if (name == "cache") return LagKind::kCacheTtl;
    if (name == "batch") return LagKind::kBatchRefresh;
    throw Error(ErrorCode::kInvalidConfig, "unknown lag kind '" + std::string(name) + "'");
}

void ComposedView::add_subsystem(std::string name, Layer layer, LagPolicy policy) {
    subsystems_[std::move(name)] = Subsystem{layer, policy, {}, {}};
}

ComposedView::Subsystem& ComposedView::find(std::string_view name) {
    auto it = subsystems_.find(name);
    if (it == subsystems_.end()) {
        throw Error(ErrorCode::kUnknownSubsystem, "no subsystem '" + std::string(name) + "'");
    }
    return it->second;
}

const ComposedView::Subsystem& ComposedView::find(std::string_view name) const {
    auto it = subsystems_.find(name);
    if (it == subsystems_.end()) {
        throw Error(ErrorCode::kUnknownSubsystem, "no subsystem '" + std::string(name) + "'");
    }
    return it->second;
}

CutId ComposedView::policy_cut(const Subsystem& subsystem, LogicalTime now) const {
    const std::uint64_t p = subsystem.policy.parameter_ms;
    switch (subsystem.policy.kind) {
        case LagKind::kReplicaLag: {
            std::uint64_t as_of = now.millis > p ? now.millis - p : 0;
            return truth_.cut_at_or_before(LogicalTime{as_of});
        }
        case LagKind::kIndexRefresh: {
            if (p == 0) return truth_.cut_at_or_before(now);
            std::uint64_t tick = now.millis / p * p;
            return truth_.cut_at_or_before(LogicalTime{tick});
        }
        case LagKind::kBatchRefresh: {
            if (p == 0) return truth_.cut_at_or_before(now);
            std::uint64_t tick = now.millis / p * p;
            std::uint64_t published = tick > p ? tick - p : 0;
            return truth_.cut_at_or_before(LogicalTime{published});
        }
        case LagKind::kCacheTtl:
            // A fresh fill serves current truth; staleness lives per entry.
            return truth_.cut_at_or_before(now);
    }
    return CutId{0};
}

CutId ComposedView::visible_cut(std::string_view subsystem, LogicalTime now) const {
    return policy_cut(find(subsystem), now);
}

ComposedView::ReadResult ComposedView::read(std::string_view name, std::string_view key,
                                            LogicalTime now) {
    Subsystem& subsystem = find(name);
    if (subsystem.policy.kind == LagKind::kCacheTtl) {
        auto it = subsystem.point_cache.find(std::string(key));
        if (it != subsystem.point_cache.end() && now.millis < it->second.expires_at_ms) {
            return {it->second.value, it->second.cut};
        }
        CutId cut = policy_cut(subsystem, now);
        CacheEntry entry{truth_.read(cut, subsystem.layer, key), cut,
                         now.millis + subsystem.policy.parameter_ms};
        subsystem.point_cache[std::string(key)] = entry;
        return {entry.value, entry.cut};
    }
    CutId cut = policy_cut(subsystem, now);
    return {truth_.read(cut, subsystem.layer, key), cut};
}

ComposedView::SearchResult ComposedView::search(std::string_view name,
                                                const EmbeddingVector& query, std::size_t k,
                                                LogicalTime now) {
    Subsystem& subsystem = find(name);
    if (subsystem.layer != Layer::kSemantic) {
        throw Error(ErrorCode::kInvalidConfig,
                    "subsystem '" + std::string(name) + "' does not serve semantic search");
    }
    CutId cut;
    if (subsystem.policy.kind == LagKind::kCacheTtl) {
        if (now.millis >= subsystem.corpus_cache.expires_at_ms) {
            subsystem.corpus_cache = {std::nullopt, policy_cut(subsystem, now),
                                      now.millis + subsystem.policy.parameter_ms};
        }
        cut = subsystem.corpus_cache.cut;
    } else {
        cut = policy_cut(subsystem, now);
    }
    return {similarity_search(truth_, cut, query, k), cut};
}

std::optional<Bytes> ComposedView::event_time_replay_read(std::string_view state_key,
                                                          LogicalTime now) const {
    std::optional<Bytes> value;
    for (const auto& [key, raw] : truth_.scan(truth_.begin_snapshot(), Layer::kEpisodic)) {
        std::optional<Episode> episode = MemoryStore::decode_episode(key, raw);
        if (!episode || episode->observed_at > now) continue;
        json payload = json::parse(episode->payload, nullptr, false);
        if (!payload.is_object() || payload.value("kind", "") != "state_transition") continue;
        if (payload.value("key", "") != state_key) continue;
        if (payload.value("deleted", false)) {
            value = std::nullopt;
        } else {
            value = base64_decode(payload.at("value_b64").get<std::string>());
        }
    }
    return value;
}

json ComparisonReport::to_json() const {
    json rows_json = json::array();
    for (const ComparisonRow& row : rows) {
        rows_json.push_back({{"mode", row.mode},
                             {"lag_kind", row.lag_kind},
                             {"lag_ms", row.lag_ms},
                             {"seed", row.seed},
                             {"decisions", row.decisions},
                             {"coherence_violations", row.coherence_violations},
                             {"invalid_outcomes", row.invalid_outcomes}});
    }
    return {{"scenario", scenario}, {"rows", std::move(rows_json)}};
}

std::string ComparisonReport::to_csv() const {
    std::ostringstream out;
    out << "scenario,mode,lag_kind,lag_ms,seed,decisions,coherence_violations,invalid_outcomes\n";
    for (const ComparisonRow& row : rows) {
        out << scenario << ',' << row.mode << ',' << row.lag_kind << ',' << row.lag_ms << ','
            << row.seed << ',' << row.decisions << ',' << row.coherence_violations << ','
            << row.invalid_outcomes << '\n';
    }
    return out.str();
}

ComparisonReport run_comparison(const RunConfig& base, LagKind kind,
                                const std::vector<std::uint64_t>& lag_grid,
                                const std::vector<std::uint64_t>& seeds) {
    if (lag_grid.empty() || seeds.empty()) {
        throw Error(ErrorCode::kInvalidConfig, "comparison needs a non-empty lag grid and seeds");
    }
    ComparisonReport report;
    report.scenario = base.scenario;

    auto run_one = [&](const RunConfig& config) {
        RunResult result = run_scenario(config);
        ViolationReport analysis = analyze(result.trace);
        ComparisonRow row;
        row.mode = config.mode;
        row.lag_kind = std::string(lag_kind_name(kind));
        row.seed = config.seed;
        row.decisions = result.metrics.decisions;
        row.coherence_violations = analysis.total_violations();
        row.invalid_outcomes = result.invalid_outcomes.size();
        return row;
    };

    for (std::uint64_t seed : seeds) {
        RunConfig lake = base;
        lake.mode = "contextlake";
        lake.seed = seed;
        lake.lags.clear();
        ComparisonRow lake_row = run_one(lake);
        for (std::uint64_t lag : lag_grid) {
            lake_row.lag_ms = lag;  // knob inapplicable; row repeated per grid point
            report.rows.push_back(lake_row);

            RunConfig composed = base;
            composed.mode = "composed";
            composed.seed = seed;
            composed.lags.clear();
            composed.lags[std::string(lag_kind_name(kind))] = lag;
            ComparisonRow row = run_one(composed);
            row.lag_ms = lag;
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace ctxlake
