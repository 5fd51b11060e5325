#include "ctxlake/analyzer.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "ctxlake/admissibility.hpp"
#include "ctxlake/base64.hpp"
#include "ctxlake/memory.hpp"

namespace ctxlake {

namespace {

using nlohmann::json;

struct ReplayedWrite {
    Layer layer;
    std::string key;
    std::optional<Bytes> value;
};

struct ReplayedCommit {
    std::uint64_t cut = 0;
    std::uint64_t time_ms = 0;
    std::uint64_t tx_id = 0;
    std::uint64_t snapshot_cut = 0;
    std::optional<std::string> decision_id;
    std::vector<std::pair<Layer, std::string>> reads;
    std::vector<ReplayedWrite> writes;
};

ReplayedCommit parse_commit(const TraceEvent& event) {
    ReplayedCommit commit;
    commit.time_ms = event.time_ms;
    commit.cut = event.fields.at("commit_cut").get<std::uint64_t>();
    commit.snapshot_cut = event.fields.at("snapshot_cut").get<std::uint64_t>();
    commit.tx_id = event.fields.value("tx_id", 0ull);
    if (event.fields.contains("decision_id")) {
        commit.decision_id = event.fields.at("decision_id").get<std::string>();
    }
    for (const json& read : event.fields.value("reads", json::array())) {
        commit.reads.emplace_back(layer_from_name(read.at("layer").get<std::string>()),
                                  read.at("key").get<std::string>());
    }
    for (const json& write : event.fields.value("writes", json::array())) {
        ReplayedWrite w;
        w.layer = layer_from_name(write.at("layer").get<std::string>());
        w.key = write.at("key").get<std::string>();
        if (!write.value("deleted", false)) {
            w.value = base64_decode(write.at("value_b64").get<std::string>());
        }
        commit.writes.push_back(std::move(w));
    }
    return commit;
}

/// Version history rebuilt purely from the trace's commit events.
class ReplayStore {
public:
    void add(const ReplayedCommit& commit) {
        for (const ReplayedWrite& w : commit.writes) {
            histories_[{w.layer, w.key}].emplace_back(commit.cut, w.value);
        }
        commit_times_.emplace_back(commit.time_ms, commit.cut);
        max_cut_ = std::max(max_cut_, commit.cut);
    }

    void finalize() {
        for (auto& [key, history] : histories_) {
            std::stable_sort(history.begin(), history.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
        }
        std::stable_sort(commit_times_.begin(), commit_times_.end());
    }

    std::optional<Bytes> read_at(std::uint64_t cut, Layer layer, const std::string& key) const {
        auto it = histories_.find({layer, key});
        if (it == histories_.end()) return std::nullopt;
        std::optional<Bytes> value;
        for (const auto& [version_cut, version_value] : it->second) {
            if (version_cut > cut) break;
            value = version_value;
        }
        return value;
    }

    std::uint64_t latest_cut_at(std::uint64_t time_ms) const {
        std::uint64_t latest = 0;
        for (const auto& [t, cut] : commit_times_) {
            if (t > time_ms) break;
            latest = std::max(latest, cut);
        }
        return latest;
    }

    std::uint64_t max_cut() const { return max_cut_; }

    std::map<std::string, Bytes> state_at(std::uint64_t cut) const {
        std::map<std::string, Bytes> out;
        for (const auto& [layer_key, history] : histories_) {
            if (layer_key.first != Layer::kState) continue;
            std::optional<Bytes> value = read_at(cut, layer_key.first, layer_key.second);
            if (value) out.emplace(layer_key.second, *value);
        }
        return out;
    }

private:
    std::map<std::pair<Layer, std::string>, std::vector<std::pair<std::uint64_t, std::optional<Bytes>>>>
        histories_;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> commit_times_;
    std::uint64_t max_cut_ = 0;
};

bool premise_resolvable(const PremiseRef& premise, const ReplayStore& store,
                        std::uint64_t latest_at_decision) {
    if (premise.cut.value > latest_at_decision) return false;
    return store.read_at(premise.cut.value, premise.layer, premise.key).has_value();
}

/// The four closure conditions, recomputed from raw events.
std::vector<std::string> recompute_violations(const DecisionRecord& d, const ReplayStore& store,
                                              std::uint64_t delta_ms) {
    std::vector<std::string> out;
    std::uint64_t latest = store.latest_cut_at(d.decided_at.millis);

    if (d.shared_effects) {
        bool priv = d.opaque_context_declared;
        for (const PremiseRef& premise : d.premises) {
            if (priv) break;
            priv = !premise_resolvable(premise, store, latest);
        }
        if (priv) out.emplace_back("PrivatePremise");
    }

    std::set<std::uint64_t> cuts;
    for (const PremiseRef& premise : d.premises) cuts.insert(premise.cut.value);
    if (cuts.size() >= 2) out.emplace_back("MixedCut");

    for (const PremiseRef& premise : d.premises) {
        if (premise.retrieved_at > d.decided_at) continue;
        if (d.decided_at.millis - premise.retrieved_at.millis >= delta_ms) {
            out.emplace_back("StalePremise");
            break;
        }
    }

    for (const PremiseRef& premise : d.premises) {
        if (premise.kind != PremiseKind::kSemantic) continue;
        bool implicit = true;
        std::optional<Bytes> value = store.read_at(premise.cut.value, premise.layer, premise.key);
        if (value) {
            auto record = MemoryStore::decode_semantic(premise.key, *value);
            implicit = !record || record->transform_id.empty() || record->sources.empty();
        }
        if (implicit) {
            out.emplace_back("ImplicitSemantics");
            break;
        }
    }
    return out;
}

std::vector<std::string> filter_by_checks(const std::vector<std::string>& violations, bool priv,
                                          bool mixed, bool stale, bool implicit) {
    std::vector<std::string> out;
    for (const std::string& v : violations) {
        if (v == "PrivatePremise" && !priv) continue;
        if (v == "MixedCut" && !mixed) continue;
        if (v == "StalePremise" && !stale) continue;
        if (v == "ImplicitSemantics" && !implicit) continue;
        out.push_back(v);
    }
    return out;
}

struct StateTx {
    std::vector<std::pair<std::string, std::optional<Bytes>>> reads;   // value at snapshot
    std::vector<std::pair<std::string, std::optional<Bytes>>> writes;
};

std::vector<StateTx> state_transactions(const std::vector<ReplayedCommit>& commits,
                                        const ReplayStore& store) {
    std::vector<StateTx> txs;
    for (const ReplayedCommit& commit : commits) {
        bool touches_state = false;
        for (const ReplayedWrite& w : commit.writes) {
            touches_state = touches_state || w.layer == Layer::kState;
        }
        if (!touches_state) continue;
        StateTx tx;
        for (const auto& [layer, key] : commit.reads) {
            if (layer != Layer::kState) continue;
            tx.reads.emplace_back(key, store.read_at(commit.snapshot_cut, Layer::kState, key));
        }
        for (const ReplayedWrite& w : commit.writes) {
            if (w.layer != Layer::kState) continue;
            tx.writes.emplace_back(w.key, w.value);
        }
        txs.push_back(std::move(tx));
    }
    return txs;
}

bool serial_equivalent(const std::vector<StateTx>& txs,
                       const std::map<std::string, Bytes>& final_state) {
    std::vector<std::size_t> order(txs.size());
    std::iota(order.begin(), order.end(), 0);
    do {
        std::map<std::string, std::optional<Bytes>> store;
        bool viable = true;
        for (std::size_t idx : order) {
            for (const auto& [key, expected] : txs[idx].reads) {
                auto it = store.find(key);
                std::optional<Bytes> actual = it == store.end() ? std::nullopt : it->second;
                if (actual != expected) {
                    viable = false;
                    break;
                }
            }
            if (!viable) break;
            for (const auto& [key, value] : txs[idx].writes) store[key] = value;
        }
        if (!viable) continue;
        std::map<std::string, Bytes> end_state;
        for (const auto& [key, value] : store) {
            if (value) end_state.emplace(key, *value);
        }
        if (end_state == final_state) return true;
    } while (std::next_permutation(order.begin(), order.end()));
    return false;
}

}  // namespace

std::uint64_t ViolationReport::total_violations() const {
    std::uint64_t total = 0;
    for (const auto& [code, count] : violations_by_code) total += count;
    return total;
}

bool ViolationReport::clean() const {
    return total_violations() == 0 && anomalies.empty() && serializable != false;
}

json ViolationReport::to_json() const {
    json codes = json::object();
    for (const auto& [code, count] : violations_by_code) codes[code] = count;
    json detail_rows = json::array();
    for (const DecisionFinding& finding : details) {
        json violations = json::array();
        for (const std::string& v : finding.violations) violations.push_back(v);
        detail_rows.push_back({{"decision_id", finding.decision_id},
                               {"violations", std::move(violations)},
                               {"runtime_mismatch", finding.runtime_mismatch}});
    }
    json anomaly_rows = json::array();
    for (const std::string& anomaly : anomalies) anomaly_rows.push_back(anomaly);
    json out = {{"summary",
                 {{"decisions", decisions},
                  {"admitted", admitted},
                  {"violations_by_code", std::move(codes)}}},
                {"details", std::move(detail_rows)},
                {"anomalies", std::move(anomaly_rows)}};
    if (serializable) out["serializable"] = *serializable;
    return out;
}

ViolationReport analyze(const std::vector<TraceEvent>& events,
                        std::optional<std::uint64_t> delta_override) {
    ViolationReport report;

    std::uint64_t report_delta = delta_override.value_or(100);
    std::uint64_t runtime_delta = report_delta;
    bool check_priv = true, check_mixed = true, check_stale = true, check_implicit = true;

    std::vector<ReplayedCommit> commits;
    std::vector<std::pair<DecisionRecord, std::size_t>> decisions;
    std::map<std::string, std::pair<bool, std::vector<std::string>>> runtime_verdicts;
    ReplayStore store;

    std::uint64_t previous_cut = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const TraceEvent& event = events[i];
        try {
            switch (event.kind) {
                case TraceKind::kMeta: {
                    if (!delta_override && event.fields.contains("config")) {
                        report_delta = event.fields.at("config").value("delta_ms", 100ull);
                        runtime_delta = report_delta;
                    }
                    if (event.fields.contains("effective_delta_ms")) {
                        runtime_delta = event.fields.at("effective_delta_ms").get<std::uint64_t>();
                    }
                    if (event.fields.contains("gate_checks")) {
                        const json& checks = event.fields.at("gate_checks");
                        check_priv = checks.value("private_premise", true);
                        check_mixed = checks.value("mixed_cut", true);
                        check_stale = checks.value("stale_premise", true);
                        check_implicit = checks.value("implicit_semantics", true);
                    }
                    break;
                }
                case TraceKind::kCommit: {
                    ReplayedCommit commit = parse_commit(event);
                    if (commit.cut <= previous_cut) {
                        report.anomalies.push_back(
                            "non-monotone commit cut " + std::to_string(commit.cut) + " after " +
                            std::to_string(previous_cut));
                    }
                    previous_cut = std::max(previous_cut, commit.cut);
                    store.add(commit);
                    commits.push_back(std::move(commit));
                    break;
                }
                case TraceKind::kDecision:
                    decisions.emplace_back(decision_from_json(event.fields), i);
                    break;
                case TraceKind::kVerdict: {
                    std::vector<std::string> names;
                    for (const json& v : event.fields.at("violations")) {
                        names.push_back(v.get<std::string>());
                    }
                    runtime_verdicts[event.fields.at("decision_id").get<std::string>()] = {
                        event.fields.at("admitted").get<bool>(), std::move(names)};
                    break;
                }
                default: break;
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParseError,
                        "event " + std::to_string(i + 1) + " (" +
                            std::string(trace_kind_name(event.kind)) + "): " + e.what());
        }
    }
    store.finalize();

    std::set<std::string> committed_decisions;
    for (const ReplayedCommit& commit : commits) {
        if (commit.decision_id) committed_decisions.insert(*commit.decision_id);
    }

    // Re-validate every decision from raw events. A decision the gate
    // rejected at runtime is the system working as intended: its recomputed
    // violations are not counted against the trace (the gate-integrity
    // comparison below still has to agree with the rejection). Violations on
    // decisions that were admitted, or that ran with no gate at all, are the
    // real findings.
    for (const auto& [decision, index] : decisions) {
        (void)index;
        ++report.decisions;
        auto verdict_it = runtime_verdicts.find(decision.decision_id);
        bool gate_rejected = verdict_it != runtime_verdicts.end() && !verdict_it->second.first;
        bool went_through = verdict_it != runtime_verdicts.end()
                                ? verdict_it->second.first
                                : committed_decisions.count(decision.decision_id) > 0;
        if (went_through) ++report.admitted;

        std::vector<std::string> violations = recompute_violations(decision, store, report_delta);
        bool counted = !violations.empty() && !gate_rejected;
        if (counted) {
            for (const std::string& v : violations) ++report.violations_by_code[v];
        }

        bool mismatch = false;
        if (verdict_it != runtime_verdicts.end()) {
            // Compare against what the runtime gate was configured to
            // enforce (gate-integrity check).
            std::vector<std::string> expected =
                filter_by_checks(recompute_violations(decision, store, runtime_delta), check_priv,
                                 check_mixed, check_stale, check_implicit);
            const auto& [runtime_admitted, runtime_violations] = verdict_it->second;
            if (runtime_admitted != expected.empty() || runtime_violations != expected) {
                mismatch = true;
                report.anomalies.push_back("gate mismatch for decision " + decision.decision_id);
            }
        }
        if (counted || mismatch) {
            report.details.push_back({decision.decision_id, std::move(violations), mismatch});
        }
    }

    // Atomic visibility: every recorded point retrieval must match the
    // rebuilt history at its cut.
    for (const TraceEvent& event : events) {
        if (event.kind != TraceKind::kRetrieval) continue;
        if (event.fields.value("access", "") != "point") continue;
        Layer layer = layer_from_name(event.fields.at("layer").get<std::string>());
        std::string key = event.fields.at("key").get<std::string>();
        std::uint64_t cut = event.fields.at("cut").get<std::uint64_t>();
        std::optional<Bytes> recorded;
        if (event.fields.value("found", false)) {
            recorded = base64_decode(event.fields.at("value_b64").get<std::string>());
        }
        std::optional<Bytes> expected = store.read_at(cut, layer, key);
        if (recorded != expected) {
            report.anomalies.push_back(
                "non-atomic visibility: retrieval of " + std::string(layer_name(layer)) + "/" +
                key + " at cut " + std::to_string(cut) + " does not match the rebuilt history");
        }
    }

    // A rejected decision must leave no visible effects.
    for (const auto& [decision_id, verdict] : runtime_verdicts) {
        if (verdict.first) continue;
        for (const ReplayedCommit& commit : commits) {
            if (commit.decision_id == decision_id) {
                report.anomalies.push_back("effects committed for rejected decision " +
                                           decision_id);
            }
        }
    }

    // Times must be non-decreasing per actor.
    std::map<std::string, std::uint64_t> last_seen;
    for (const TraceEvent& event : events) {
        std::string actor = event.fields.value("agent", event.fields.value("actor", ""));
        if (actor.empty()) continue;
        auto [it, inserted] = last_seen.try_emplace(actor, event.time_ms);
        if (!inserted) {
            if (event.time_ms < it->second) {
                report.anomalies.push_back("time went backwards for actor " + actor);
            }
            it->second = event.time_ms;
        }
    }

    // Serial equivalence, bounded brute force.
    std::vector<StateTx> txs = state_transactions(commits, store);
    if (txs.size() <= 6) {
        bool ok = txs.empty() || serial_equivalent(txs, store.state_at(store.max_cut()));
        report.serializable = ok;
        if (!ok) {
            report.anomalies.push_back("history is not serially equivalent (non-atomic visibility "
                                       "or lost update in committed state transactions)");
        }
    }

    return report;
}

ViolationReport analyze_stream(std::istream& jsonl, std::optional<std::uint64_t> delta_override) {
    return analyze(TraceLog::parse(jsonl), delta_override);
}

bool check_serializable(const std::vector<TraceEvent>& events, std::size_t max_tx) {
    ReplayStore store;
    std::vector<ReplayedCommit> commits;
    for (const TraceEvent& event : events) {
        if (event.kind != TraceKind::kCommit) continue;
        ReplayedCommit commit = parse_commit(event);
        store.add(commit);
        commits.push_back(std::move(commit));
    }
    store.finalize();

    std::vector<StateTx> txs = state_transactions(commits, store);
    if (txs.size() > max_tx) {
        throw Error(ErrorCode::kTooManyTransactions,
                    std::to_string(txs.size()) + " state transactions exceed the oracle bound of " +
                        std::to_string(max_tx));
    }
    if (txs.empty()) return true;
    return serial_equivalent(txs, store.state_at(store.max_cut()));
}

}  // namespace ctxlake
