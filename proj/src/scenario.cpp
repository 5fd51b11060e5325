#include "ctxlake/scenario.hpp"

#include <memory>
#include <random>

#include "ctxlake/admissibility.hpp"
#include "ctxlake/base64.hpp"
#include "ctxlake/composed.hpp"
#include "ctxlake/memory.hpp"
#include "ctxlake/semantic.hpp"

namespace ctxlake {

namespace {

using nlohmann::json;

// Warehouse timeline, logical milliseconds of day (14:23:10.000 setup,
// correction and order traffic inside the 14:23:18 second).
constexpr std::uint64_t kWhSetup = 51'790'000;
constexpr std::uint64_t kWhMonitorRead = 51'798'250;
constexpr std::uint64_t kWhReturn = 51'798'300;
constexpr std::uint64_t kWhCorrection = 51'798'310;
constexpr std::uint64_t kWhOrderIntake = 51'798'320;
constexpr std::uint64_t kWhShippingRead = 51'798'350;
constexpr std::uint64_t kWhShippingDecide = 51'798'400;

// Checkout timeline.
constexpr std::uint64_t kCoSetup = 1'000;
constexpr std::uint64_t kCoClickA = 1'100;
constexpr std::uint64_t kCoClickB = 1'120;
constexpr std::uint64_t kCoInterpret = 1'150;
constexpr std::uint64_t kCoDecide = 1'200;

constexpr std::uint64_t kHugeDelta = 1'000'000'000;

const std::string kPrecursorQuery = "account takeover precursor direct arrival no browsing";
const std::string kPrecursorText =
    "direct arrival on checkout url purchase without browsing account takeover precursor pattern";
constexpr double kPrecursorThreshold = 0.4;

std::uint64_t stale_delta(const RunConfig& config) {
    bool degraded = config.scenario == "failure_matrix" && config.variant == "stale";
    return degraded ? kHugeDelta : config.delta_ms;
}

std::uint32_t effective_limit(const RunConfig& config) {
    bool degraded = config.scenario == "failure_matrix" && config.variant == "overload";
    return degraded ? 1'000'000u : config.max_concurrent;
}

Gate::Checks checks_for(const RunConfig& config) {
    Gate::Checks checks;
    if (config.scenario != "failure_matrix") return checks;
    if (config.variant == "incoherent") checks.mixed_cut = false;
    if (config.variant == "implicit") {
        checks.implicit_semantics = false;
        checks.private_premise = false;
    }
    return checks;
}

json checks_json(const Gate::Checks& checks) {
    return {{"private_premise", checks.private_premise},
            {"mixed_cut", checks.mixed_cut},
            {"stale_premise", checks.stale_premise},
            {"implicit_semantics", checks.implicit_semantics}};
}

struct Ctx {
    explicit Ctx(const RunConfig& cfg)
        : config(cfg),
          clock(0),
          kernel(clock),
          store(kernel, clock, registry,
                MemoryOptions{.enforce_semantic_authority =
                                  !(cfg.scenario == "failure_matrix" && cfg.variant == "implicit")}),
          gate(kernel, store, registry, EnvelopeConfig{stale_delta(cfg), cfg.max_concurrent}),
          limiter(effective_limit(cfg)),
          scheduler(clock),
          rng(cfg.seed) {
        gate.set_enabled_checks(checks_for(cfg));
    }

    RunConfig config;
    SimulatedClock clock;
    TransformationRegistry registry;
    Kernel kernel;
    MemoryStore store;
    Gate gate;
    SlotLimiter limiter;
    MetricsCollector metrics;
    Scheduler scheduler;
    TraceLog trace;
    std::mt19937_64 rng;
    std::unique_ptr<ComposedView> composed;
    std::vector<InvalidOutcome> invalid;
    Symptoms symptoms;

    bool lake() const { return config.mode == "contextlake"; }
    std::uint64_t now_ms() const { return clock.now().millis; }
    std::string nonce() { return std::to_string(rng() % 100000); }
};

json reads_json(const std::set<std::pair<Layer, std::string>>& reads) {
    json out = json::array();
    for (const auto& [layer, key] : reads) {
        out.push_back({{"layer", std::string(layer_name(layer))}, {"key", key}});
    }
    return out;
}

json writes_json(const std::vector<PendingWrite>& writes) {
    json out = json::array();
    for (const PendingWrite& w : writes) {
        json entry = {{"layer", std::string(layer_name(w.layer))}, {"key", w.key}};
        if (w.value) {
            entry["value_b64"] = base64_encode(*w.value);
        } else {
            entry["deleted"] = true;
        }
        out.push_back(std::move(entry));
    }
    return out;
}

struct Retrieved {
    std::optional<Bytes> value;
    PremiseRef premise;

    std::string text_or(const std::string& fallback) const { return value ? *value : fallback; }
    long number_or(long fallback) const {
        if (!value) return fallback;
        try {
            return std::stol(*value);
        } catch (...) {
            return fallback;
        }
    }
};

PremiseKind kind_of(Layer layer) {
    return layer == Layer::kSemantic ? PremiseKind::kSemantic : PremiseKind::kBase;
}

Retrieved retrieve_point(Ctx& ctx, const std::string& agent, CutId cut, Layer layer,
                         const std::string& key) {
    std::optional<Bytes> value = ctx.kernel.read(cut, layer, key);
    json fields = {{"access", "point"},       {"agent", agent},
                   {"layer", std::string(layer_name(layer))}, {"key", key},
                   {"cut", cut.value},        {"found", value.has_value()}};
    if (value) fields["value_b64"] = base64_encode(*value);
    ctx.trace.append(TraceKind::kRetrieval, ctx.now_ms(), std::move(fields));
    ctx.metrics.record_retrieval(0);
    return {value, PremiseRef{layer, key, cut, ctx.clock.now(), kind_of(layer)}};
}

Retrieved retrieve_via(Ctx& ctx, const std::string& agent, const std::string& subsystem,
                       Layer layer, const std::string& key) {
    ComposedView::ReadResult result = ctx.composed->read(subsystem, key, ctx.clock.now());
    json fields = {{"access", "point"},       {"agent", agent},
                   {"layer", std::string(layer_name(layer))}, {"key", key},
                   {"cut", result.cut.value}, {"found", result.value.has_value()},
                   {"subsystem", subsystem}};
    if (result.value) fields["value_b64"] = base64_encode(*result.value);
    ctx.trace.append(TraceKind::kRetrieval, ctx.now_ms(), std::move(fields));
    ctx.metrics.record_retrieval(0);
    return {result.value, PremiseRef{layer, key, result.cut, ctx.clock.now(), kind_of(layer)}};
}

json hits_json(const std::vector<SearchHit>& hits) {
    json out = json::array();
    for (const SearchHit& hit : hits) out.push_back({{"key", hit.key}, {"score", hit.score}});
    return out;
}

std::vector<SearchHit> search_lake(Ctx& ctx, const std::string& agent, CutId cut,
                                   const std::string& query, std::size_t k) {
    std::vector<SearchHit> hits = similarity_search(ctx.kernel, cut, embed(query), k);
    ctx.trace.append(TraceKind::kRetrieval, ctx.now_ms(),
                     {{"access", "search"},
                      {"agent", agent},
                      {"query", query},
                      {"k", k},
                      {"cut", cut.value},
                      {"results", hits_json(hits)}});
    ctx.metrics.record_retrieval(0);
    return hits;
}

ComposedView::SearchResult search_via(Ctx& ctx, const std::string& agent,
                                      const std::string& subsystem, const std::string& query,
                                      std::size_t k) {
    ComposedView::SearchResult result = ctx.composed->search(subsystem, embed(query), k,
                                                             ctx.clock.now());
    ctx.trace.append(TraceKind::kRetrieval, ctx.now_ms(),
                     {{"access", "search"},
                      {"agent", agent},
                      {"query", query},
                      {"k", k},
                      {"cut", result.cut.value},
                      {"results", hits_json(result.hits)},
                      {"subsystem", subsystem}});
    ctx.metrics.record_retrieval(0);
    return result;
}

/// Non-decision contribution (sensor feed, bootstrap). Still traced as a
/// commit so the analyzer can reconstruct the full history.
CutId feed_commit(Ctx& ctx, Transaction& tx, const std::string& actor) {
    json reads = reads_json(tx.read_set());
    json writes = writes_json(tx.write_set());
    std::uint64_t tx_id = tx.id();
    std::uint64_t snapshot = tx.snapshot().value;
    CutId cut = ctx.kernel.commit_tx(tx);
    ctx.trace.append(TraceKind::kCommit, ctx.now_ms(),
                     {{"tx_id", tx_id},
                      {"actor", actor},
                      {"snapshot_cut", snapshot},
                      {"commit_cut", cut.value},
                      {"reads", std::move(reads)},
                      {"writes", std::move(writes)}});
    return cut;
}

std::uint64_t max_premise_age(const DecisionRecord& d) {
    std::uint64_t age = 0;
    for (const PremiseRef& premise : d.premises) {
        if (premise.retrieved_at <= d.decided_at) {
            age = std::max(age, d.decided_at.millis - premise.retrieved_at.millis);
        }
    }
    return age;
}

struct DecisionOutcome {
    Verdict verdict;
    std::optional<CutId> committed;
    std::optional<ErrorCode> commit_error;
};

/// Full Context Lake path: decision evaluated by the gate, committed only if
/// admitted. Emits decision, verdict, prepare and commit/abort trace events.
DecisionOutcome decide_gated(Ctx& ctx, const DecisionRecord& d,
                             const std::function<void(Transaction&)>& build) {
    ctx.trace.append(TraceKind::kDecision, d.decided_at.millis, decision_to_json(d));
    std::uint64_t age = max_premise_age(d);

    Transaction tx = ctx.kernel.begin_tx();
    try {
        build(tx);
    } catch (const Error& e) {
        ctx.kernel.abort_tx(tx);
        ctx.metrics.record_decision(false, {}, age);
        ctx.trace.append(TraceKind::kAbort, ctx.now_ms(),
                         {{"tx_id", tx.id()},
                          {"decision_id", d.decision_id},
                          {"reason", std::string(error_code_name(e.code()))}});
        return {Verdict{false, {}}, std::nullopt, e.code()};
    }

    Verdict verdict = ctx.gate.check(d);
    json names = json::array();
    for (const std::string& name : verdict.violation_names()) names.push_back(name);
    ctx.trace.append(TraceKind::kVerdict, d.decided_at.millis,
                     {{"decision_id", d.decision_id},
                      {"admitted", verdict.admitted},
                      {"violations", std::move(names)}});
    ctx.metrics.record_decision(verdict.admitted, verdict.violation_names(), age);

    if (!verdict.admitted) {
        ctx.kernel.abort_tx(tx);
        ctx.trace.append(TraceKind::kAbort, ctx.now_ms(),
                         {{"tx_id", tx.id()},
                          {"decision_id", d.decision_id},
                          {"reason", "rejected"}});
        return {verdict, std::nullopt, std::nullopt};
    }

    json reads = reads_json(tx.read_set());
    std::uint64_t snapshot = tx.snapshot().value;
    ctx.trace.append(TraceKind::kPrepare, ctx.now_ms(),
                     {{"tx_id", tx.id()}, {"decision_id", d.decision_id}});
    std::vector<PendingWrite> committed_writes;
    try {
        auto result = ctx.gate.admit_and_commit(d, tx, &committed_writes);
        CutId cut = std::get<CutId>(result);
        ctx.trace.append(TraceKind::kCommit, ctx.now_ms(),
                         {{"tx_id", tx.id()},
                          {"decision_id", d.decision_id},
                          {"snapshot_cut", snapshot},
                          {"commit_cut", cut.value},
                          {"reads", std::move(reads)},
                          {"writes", writes_json(committed_writes)}});
        for (const Effect& effect : d.effects) {
            if (effect.kind == Effect::Kind::kExternalAction) {
                ctx.trace.append(TraceKind::kExternalAction, ctx.now_ms(),
                                 {{"agent", d.agent_id},
                                  {"decision_id", d.decision_id},
                                  {"action", effect.target}});
            }
        }
        return {verdict, cut, std::nullopt};
    } catch (const Error& e) {
        ctx.trace.append(TraceKind::kAbort, ctx.now_ms(),
                         {{"tx_id", tx.id()},
                          {"decision_id", d.decision_id},
                          {"reason", std::string(error_code_name(e.code()))}});
        return {verdict, std::nullopt, e.code()};
    }
}

/// Composed-architecture path: there is no gate to consult, decisions act
/// directly. Emits decision, prepare and commit/abort events (no verdict).
DecisionOutcome decide_ungated(Ctx& ctx, const DecisionRecord& d,
                               const std::function<void(Transaction&)>& build) {
    ctx.trace.append(TraceKind::kDecision, d.decided_at.millis, decision_to_json(d));
    std::uint64_t age = max_premise_age(d);

    Transaction tx = ctx.kernel.begin_tx();
    try {
        build(tx);
        for (const Effect& effect : d.effects) {
            if (effect.kind == Effect::Kind::kExternalAction) {
                ctx.store.append_external_action(tx, d.decision_id, d.agent_id, effect.target,
                                                 d.decided_at);
            }
        }
    } catch (const Error& e) {
        ctx.kernel.abort_tx(tx);
        ctx.metrics.record_decision(false, {}, age);
        ctx.trace.append(TraceKind::kAbort, ctx.now_ms(),
                         {{"tx_id", tx.id()},
                          {"decision_id", d.decision_id},
                          {"reason", std::string(error_code_name(e.code()))}});
        return {Verdict{false, {}}, std::nullopt, e.code()};
    }

    json reads = reads_json(tx.read_set());
    json writes = writes_json(tx.write_set());
    std::uint64_t snapshot = tx.snapshot().value;
    ctx.trace.append(TraceKind::kPrepare, ctx.now_ms(),
                     {{"tx_id", tx.id()}, {"decision_id", d.decision_id}});
    try {
        CutId cut = ctx.kernel.commit_tx(tx);
        ctx.metrics.record_decision(true, {}, age);
        ctx.trace.append(TraceKind::kCommit, ctx.now_ms(),
                         {{"tx_id", tx.id()},
                          {"decision_id", d.decision_id},
                          {"snapshot_cut", snapshot},
                          {"commit_cut", cut.value},
                          {"reads", std::move(reads)},
                          {"writes", std::move(writes)}});
        for (const Effect& effect : d.effects) {
            if (effect.kind == Effect::Kind::kExternalAction) {
                ctx.trace.append(TraceKind::kExternalAction, ctx.now_ms(),
                                 {{"agent", d.agent_id},
                                  {"decision_id", d.decision_id},
                                  {"action", effect.target}});
            }
        }
        return {Verdict{true, {}}, cut, std::nullopt};
    } catch (const Error& e) {
        ctx.metrics.record_decision(false, {}, age);
        ctx.trace.append(TraceKind::kAbort, ctx.now_ms(),
                         {{"tx_id", tx.id()},
                          {"decision_id", d.decision_id},
                          {"reason", std::string(error_code_name(e.code()))}});
        return {Verdict{false, {}}, std::nullopt, e.code()};
    }
}

StateTransition expect_value(const Bytes& want, std::optional<Bytes> next) {
    return {[want](const std::optional<Bytes>& v) { return v == want; }, std::move(next)};
}

StateTransition expect_absent(Bytes next) {
    return {[](const std::optional<Bytes>& v) { return !v.has_value(); }, std::move(next)};
}

// ---------------------------------------------------------------------------
// warehouse
// ---------------------------------------------------------------------------

LagPolicy warehouse_inventory_policy(const RunConfig& config) {
    for (const char* kind : {"replica", "index", "cache", "batch"}) {
        auto it = config.lags.find(kind);
        if (it != config.lags.end()) return {lag_kind_from_name(kind), it->second};
    }
    return {LagKind::kReplicaLag, 0};
}

void schedule_warehouse(Ctx& ctx) {
    bool lake = ctx.lake();
    if (!lake) {
        ctx.composed = std::make_unique<ComposedView>(ctx.kernel);
        ctx.composed->add_subsystem("orders", Layer::kState, {LagKind::kReplicaLag, 0});
        ctx.composed->add_subsystem("inventory", Layer::kState,
                                    warehouse_inventory_policy(ctx.config));
    }
    ctx.store.register_state_validator(
        "inv:", [](std::string_view, const std::optional<Bytes>&,
                   const std::optional<Bytes>& next) -> std::optional<std::string> {
            if (next && !next->empty() && (*next)[0] == '-') return "negative inventory";
            return std::nullopt;
        });

    // Stock audit long before the hot window.
    ctx.scheduler.at(kWhSetup, [&ctx] {
        Transaction tx = ctx.kernel.begin_tx();
        ctx.store.append_episode_in(tx, "feed:audit", ctx.clock.now(),
                                    "stock count SKU1 2 units nonce:" + ctx.nonce());
        ctx.store.update_state(tx, "inv:SKU1", expect_absent("2"), "feed:audit");
        feed_commit(ctx, tx, "feed:audit");
    });

    // Inventory monitor read; in composed cache mode this is what populates
    // the cache that the shipping agent later hits.
    ctx.scheduler.at(kWhMonitorRead, [&ctx, lake] {
        if (lake) {
            retrieve_point(ctx, "agent:monitor", ctx.kernel.begin_snapshot(), Layer::kState,
                           "inv:SKU1");
        } else {
            retrieve_via(ctx, "agent:monitor", "inventory", Layer::kState, "inv:SKU1");
        }
    });

    // Restocking Agent processes the defective return and submits a
    // correction request.
    ctx.scheduler.at(kWhReturn, [&ctx, lake] {
        Transaction obs = ctx.kernel.begin_tx();
        std::uint64_t return_seq =
            ctx.store.append_episode_in(obs, "feed:returns", ctx.clock.now(),
                                        "return received SKU1 unit defective nonce:" + ctx.nonce());
        feed_commit(ctx, obs, "feed:returns");

        CutId cut = ctx.kernel.begin_snapshot();
        Retrieved ret = retrieve_point(ctx, "agent:restocking", cut, Layer::kEpisodic,
                                       MemoryStore::episodic_key(return_seq));
        Retrieved inv = retrieve_point(ctx, "agent:restocking", cut, Layer::kState, "inv:SKU1");

        DecisionRecord d;
        d.decision_id = "wh-restock-correct";
        d.agent_id = "agent:restocking";
        d.premises = {ret.premise, inv.premise};
        d.decided_at = ctx.clock.now();
        d.effects = {{Effect::Kind::kEpisodeAppend, "correction-request:SKU1"}};
        long counted = inv.number_or(0);
        auto build = [&ctx, return_seq, counted](Transaction& tx) {
            json payload = {{"kind", "correction_request"},
                            {"sku", "SKU1"},
                            {"corrects_seq", return_seq},
                            {"new_count", std::to_string(counted - 1)}};
            ctx.store.append_episode_in(tx, "agent:restocking", ctx.clock.now(), payload.dump());
        };
        lake ? decide_gated(ctx, d, build) : decide_ungated(ctx, d, build);
    });

    // Inventory Agent applies the correction transactionally: 2 -> 1.
    ctx.scheduler.at(kWhCorrection, [&ctx, lake] {
        CutId cut = ctx.kernel.begin_snapshot();
        std::optional<std::uint64_t> request_seq;
        json request;
        for (const auto& [key, value] : ctx.kernel.scan_prefix(cut, Layer::kEpisodic, "ep:")) {
            std::optional<Episode> episode = MemoryStore::decode_episode(key, value);
            if (!episode) continue;
            json payload = json::parse(episode->payload, nullptr, false);
            if (payload.is_object() && payload.value("kind", "") == "correction_request") {
                request_seq = episode->seq;
                request = payload;
            }
        }
        if (!request_seq) return;

        Retrieved req = retrieve_point(ctx, "agent:inventory", cut, Layer::kEpisodic,
                                       MemoryStore::episodic_key(*request_seq));
        Retrieved inv = retrieve_point(ctx, "agent:inventory", cut, Layer::kState, "inv:SKU1");

        DecisionRecord d;
        d.decision_id = "wh-inventory-apply";
        d.agent_id = "agent:inventory";
        d.premises = {req.premise, inv.premise};
        d.decided_at = ctx.clock.now();
        d.effects = {{Effect::Kind::kStateWrite, "inv:SKU1"}};
        std::string new_count = request.value("new_count", "1");
        std::string old_count = inv.text_or("");
        auto build = [&ctx, old_count, new_count](Transaction& tx) {
            ctx.store.update_state(tx, "inv:SKU1", expect_value(old_count, new_count),
                                   "agent:inventory");
        };
        lake ? decide_gated(ctx, d, build) : decide_ungated(ctx, d, build);
    });

    // Order intake feed: O1 requires 2 units of SKU1.
    ctx.scheduler.at(kWhOrderIntake, [&ctx] {
        Transaction tx = ctx.kernel.begin_tx();
        ctx.store.append_episode_in(tx, "feed:orders", ctx.clock.now(),
                                    "order O1 SKU1 qty 2 nonce:" + ctx.nonce());
        ctx.store.update_state(tx, "order:O1:qty", expect_absent("2"), "feed:orders");
        ctx.store.update_state(tx, "order:O1:status", expect_absent("pending"), "feed:orders");
        feed_commit(ctx, tx, "feed:orders");
    });

    // Shipping Agent: retrieval at .350. An order that looks coverable is
    // confirmed on the spot; recognizing insufficient inventory takes until
    // .400, when the agent escalates for split-shipment approval.
    ctx.scheduler.at(kWhShippingRead, [&ctx, lake] {
        Retrieved qty, status, inv;
        if (lake) {
            CutId cut = ctx.kernel.begin_snapshot();
            qty = retrieve_point(ctx, "agent:shipping", cut, Layer::kState, "order:O1:qty");
            status = retrieve_point(ctx, "agent:shipping", cut, Layer::kState, "order:O1:status");
            inv = retrieve_point(ctx, "agent:shipping", cut, Layer::kState, "inv:SKU1");
        } else {
            qty = retrieve_via(ctx, "agent:shipping", "orders", Layer::kState, "order:O1:qty");
            status = retrieve_via(ctx, "agent:shipping", "orders", Layer::kState,
                                  "order:O1:status");
            inv = retrieve_via(ctx, "agent:shipping", "inventory", Layer::kState, "inv:SKU1");
        }
        long need = qty.number_or(0);
        long avail = inv.number_or(0);

        if (avail >= need) {
            DecisionRecord d;
            d.decision_id = "wh-shipping-allocate";
            d.agent_id = "agent:shipping";
            d.premises = {qty.premise, status.premise, inv.premise};
            d.decided_at = ctx.clock.now();
            d.effects = {{Effect::Kind::kStateWrite, "order:O1:status"},
                         {Effect::Kind::kStateWrite, "inv:SKU1"},
                         {Effect::Kind::kExternalAction, "confirm-order:O1"}};
            std::string remaining = std::to_string(avail - need);
            std::string allocated = "allocated:" + std::to_string(need);
            DecisionOutcome outcome;
            if (lake) {
                auto build = [&ctx, &status, &inv, remaining, allocated](Transaction& tx) {
                    ctx.store.update_state(tx, "order:O1:status",
                                           expect_value(status.text_or(""), allocated),
                                           "agent:shipping");
                    ctx.store.update_state(tx, "inv:SKU1",
                                           expect_value(inv.text_or(""), remaining),
                                           "agent:shipping");
                };
                outcome = decide_gated(ctx, d, build);
            } else {
                // Blind writes computed from whatever the subsystems served:
                // the composed architecture has no shared snapshot to check
                // against.
                auto build = [&ctx, remaining, allocated](Transaction& tx) {
                    ctx.kernel.tx_write(tx, Layer::kState, "order:O1:status", allocated);
                    ctx.kernel.tx_write(tx, Layer::kState, "inv:SKU1", remaining);
                };
                outcome = decide_ungated(ctx, d, build);
            }
            if (outcome.committed) {
                CutId before{outcome.committed->value - 1};
                long truth =
                    std::stol(ctx.kernel.read(before, Layer::kState, "inv:SKU1").value_or("0"));
                if (truth < need) {
                    ctx.invalid.push_back(
                        {d.decision_id, "allocated " + std::to_string(need) +
                                            " units of inv:SKU1 with " + std::to_string(truth) +
                                            " available"});
                }
            }
            return;
        }

        ctx.scheduler.at(kWhShippingDecide, [&ctx, lake, qty, status, inv] {
            DecisionRecord d;
            d.decision_id = "wh-shipping-escalate";
            d.agent_id = "agent:shipping";
            d.premises = {qty.premise, status.premise, inv.premise};
            d.decided_at = ctx.clock.now();
            d.effects = {{Effect::Kind::kStateWrite, "order:O1:status"},
                         {Effect::Kind::kExternalAction, "escalate-split-shipment"}};
            auto build = [&ctx, status](Transaction& tx) {
                ctx.store.update_state(tx, "order:O1:status",
                                       expect_value(status.text_or(""), Bytes("escalated")),
                                       "agent:shipping");
            };
            lake ? decide_gated(ctx, d, build) : decide_ungated(ctx, d, build);
        });
    });
}

// ---------------------------------------------------------------------------
// checkout
// ---------------------------------------------------------------------------

PrototypeSet checkout_prototypes(const RunConfig& config) {
    PrototypeSet prototypes;
    prototypes.set_prototype("direct-arrival-no-browse",
                             "direct arrival on checkout url purchase without browsing");
    prototypes.set_prototype("normal-browse",
                             "organic navigation browsing product pages before purchase");
    for (const auto& [label, text] : config.prototypes) prototypes.set_prototype(label, text);
    return prototypes;
}

Transformation behavior_patterns_v1() {
    return {"behavior_patterns", 1, [](const std::vector<Episode>& episodes) {
                std::vector<SemanticRecord> records;
                if (episodes.empty()) return records;
                std::vector<std::uint64_t> sources;
                for (const Episode& e : episodes) sources.push_back(e.seq);
                records.push_back({"sem:behavior:acct:42", kPrecursorText, "behavior_patterns", 1,
                                   sources, CutId{}});
                return records;
            }};
}

Transformation risk_signals_v1() {
    return {"risk_signals", 1, [](const std::vector<Episode>& episodes) {
                std::vector<SemanticRecord> records;
                if (episodes.empty()) return records;
                records.push_back({"sem:risk:P99",
                                   "account takeover precursor high risk payment deny",
                                   "risk_signals", 1, {episodes.front().seq}, CutId{}});
                return records;
            }};
}

void schedule_checkout(Ctx& ctx) {
    bool lake = ctx.lake();
    if (!lake) {
        std::uint64_t index_lag = ctx.config.lags.count("index") ? ctx.config.lag("index") : 1000;
        ctx.composed = std::make_unique<ComposedView>(ctx.kernel);
        ctx.composed->add_subsystem("operational", Layer::kState, {LagKind::kReplicaLag, 0});
        ctx.composed->add_subsystem("behavior", Layer::kSemantic,
                                    {LagKind::kIndexRefresh, index_lag});
    }

    register_scenario_transformations("checkout", ctx.registry);

    auto clicks = std::make_shared<std::vector<std::uint64_t>>();

    ctx.scheduler.at(kCoSetup, [&ctx] {
        Transaction tx = ctx.kernel.begin_tx();
        ctx.store.append_episode_in(tx, "feed:orders", ctx.clock.now(),
                                    "order O9 account 42 amount 180 nonce:" + ctx.nonce());
        ctx.store.update_state(tx, "acct:42:status", expect_absent("clean"), "feed:orders");
        ctx.store.update_state(tx, "order:O9:amount", expect_absent("180"), "feed:orders");
        ctx.store.update_state(tx, "order:O9:account", expect_absent("42"), "feed:orders");
        ctx.store.update_state(tx, "order:O9:status", expect_absent("pending"), "feed:orders");
        feed_commit(ctx, tx, "feed:orders");
    });

    ctx.scheduler.at(kCoClickA, [&ctx, clicks] {
        Transaction tx = ctx.kernel.begin_tx();
        clicks->push_back(ctx.store.append_episode_in(
            tx, "feed:clickstream", ctx.clock.now(),
            "session s7 account 42 direct arrival on checkout url nonce:" + ctx.nonce()));
        feed_commit(ctx, tx, "feed:clickstream");
    });
    ctx.scheduler.at(kCoClickB, [&ctx, clicks] {
        Transaction tx = ctx.kernel.begin_tx();
        clicks->push_back(ctx.store.append_episode_in(
            tx, "feed:clickstream", ctx.clock.now(),
            "session s7 account 42 purchase without browsing nonce:" + ctx.nonce()));
        feed_commit(ctx, tx, "feed:clickstream");
    });

    // Behavior agent interprets the clickstream; context preparation, same
    // in both architectures. Only its visibility to the checkout agent
    // differs.
    ctx.scheduler.at(kCoInterpret, [&ctx, clicks] {
        TransformationRunner runner(ctx.store, ctx.registry);
        CutId cut = runner.run("behavior_patterns", 1, *clicks);
        ctx.trace.append(TraceKind::kCommit, ctx.now_ms(),
                         {{"tx_id", 0},
                          {"actor", "agent:behavior"},
                          {"snapshot_cut", cut.value - 1},
                          {"commit_cut", cut.value},
                          {"reads", nlohmann::json::array()},
                          {"writes", writes_json({PendingWrite{
                               Layer::kSemantic, "sem:behavior:acct:42",
                               ctx.kernel.read(cut, Layer::kSemantic, "sem:behavior:acct:42"),
                               std::nullopt}})}});
    });

    ctx.scheduler.at(kCoDecide, [&ctx, lake] {
        PrototypeSet prototypes = checkout_prototypes(ctx.config);
        std::vector<std::string> labels = {"direct-arrival-no-browse", "normal-browse"};

        std::vector<Retrieved> base;
        std::vector<SearchHit> hits;
        CutId search_cut{0};
        if (lake) {
            CutId cut = ctx.kernel.begin_snapshot();
            base.push_back(retrieve_point(ctx, "agent:checkout", cut, Layer::kState,
                                          "acct:42:status"));
            base.push_back(retrieve_point(ctx, "agent:checkout", cut, Layer::kState,
                                          "order:O9:amount"));
            base.push_back(retrieve_point(ctx, "agent:checkout", cut, Layer::kState,
                                          "order:O9:status"));
            hits = search_lake(ctx, "agent:checkout", cut, kPrecursorQuery, 3);
            search_cut = cut;
        } else {
            base.push_back(retrieve_via(ctx, "agent:checkout", "operational", Layer::kState,
                                        "acct:42:status"));
            base.push_back(retrieve_via(ctx, "agent:checkout", "operational", Layer::kState,
                                        "order:O9:amount"));
            base.push_back(retrieve_via(ctx, "agent:checkout", "operational", Layer::kState,
                                        "order:O9:status"));
            ComposedView::SearchResult result =
                search_via(ctx, "agent:checkout", "behavior", kPrecursorQuery, 3);
            hits = result.hits;
            search_cut = result.cut;
        }

        bool precursor = false;
        std::optional<Retrieved> pattern;
        if (!hits.empty() && hits[0].score >= kPrecursorThreshold) {
            if (lake) {
                pattern = retrieve_point(ctx, "agent:checkout", search_cut, Layer::kSemantic,
                                         hits[0].key);
            } else {
                pattern = retrieve_via(ctx, "agent:checkout", "behavior", Layer::kSemantic,
                                       hits[0].key);
            }
            if (pattern->value) {
                auto record = MemoryStore::decode_semantic(hits[0].key, *pattern->value);
                const Bytes& text = record ? record->interpretation : *pattern->value;
                precursor = classify(prototypes, text, labels) == "direct-arrival-no-browse";
            }
        }

        DecisionRecord d;
        d.agent_id = "agent:checkout";
        d.decided_at = ctx.clock.now();
        for (const Retrieved& r : base) d.premises.push_back(r.premise);
        if (pattern) d.premises.push_back(pattern->premise);

        const std::string status_now = base[2].text_or("");
        if (precursor) {
            d.decision_id = "co-hold-review";
            d.effects = {{Effect::Kind::kStateWrite, "order:O9:status"},
                         {Effect::Kind::kExternalAction, "queue-manual-review:O9"}};
            auto build = [&ctx, status_now](Transaction& tx) {
                ctx.store.update_state(tx, "order:O9:status",
                                       expect_value(status_now, Bytes("hold_review")),
                                       "agent:checkout");
            };
            lake ? decide_gated(ctx, d, build) : decide_ungated(ctx, d, build);
        } else {
            d.decision_id = "co-authorize-ship";
            d.effects = {{Effect::Kind::kStateWrite, "order:O9:status"},
                         {Effect::Kind::kExternalAction, "ship-order:O9"}};
            auto build = [&ctx, status_now](Transaction& tx) {
                ctx.store.update_state(tx, "order:O9:status",
                                       expect_value(status_now, Bytes("shipped")),
                                       "agent:checkout");
            };
            DecisionOutcome outcome =
                lake ? decide_gated(ctx, d, build) : decide_ungated(ctx, d, build);
            if (outcome.committed) {
                // Flagged purchase shipped? Ground truth at decision time.
                CutId truth_cut = ctx.kernel.cut_at_or_before(d.decided_at);
                if (ctx.kernel.read(truth_cut, Layer::kSemantic, "sem:behavior:acct:42")) {
                    ctx.invalid.push_back(
                        {d.decision_id,
                         "flagged purchase shipped: account-takeover precursor existed at "
                         "decision time"});
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// load_sweep
// ---------------------------------------------------------------------------

void schedule_load_sweep(Ctx& ctx) {
    constexpr std::uint64_t kStart = 1'000;
    constexpr std::uint64_t kWindowMs = 10;
    constexpr std::uint64_t kWorkMs = 5;
    constexpr int kWindows = 10;
    const std::uint32_t c = ctx.config.max_concurrent;

    ctx.scheduler.at(kStart - 100, [&ctx] {
        Transaction tx = ctx.kernel.begin_tx();
        ctx.store.append_episode_in(tx, "feed:setup", ctx.clock.now(),
                                    "load sweep start nonce:" + ctx.nonce());
        ctx.store.update_state(tx, "load:jobs", expect_absent("open"), "feed:setup");
        feed_commit(ctx, tx, "feed:setup");
    });

    for (int window = 0; window < kWindows; ++window) {
        std::uint64_t t = kStart + window * kWindowMs;
        // 2C attempts per window; the seed shuffles attempt order.
        std::vector<std::uint32_t> order(2 * c);
        for (std::uint32_t i = 0; i < 2 * c; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), ctx.rng);

        for (std::uint32_t attempt : order) {
            ctx.scheduler.at(t, [&ctx, window, attempt, t] {
                std::string agent = "agent:load" + std::to_string(attempt);
                std::string decision_id =
                    "ls-w" + std::to_string(window) + "-a" + std::to_string(attempt);
                auto slot = ctx.limiter.try_acquire();
                if (!slot) {
                    ctx.metrics.record_over_envelope();
                    ctx.trace.append(TraceKind::kAbort, ctx.now_ms(),
                                     {{"agent", agent},
                                      {"decision_id", decision_id},
                                      {"reason", "OverEnvelope"}});
                    return;
                }
                CutId cut = ctx.kernel.begin_snapshot();
                Retrieved jobs = retrieve_point(ctx, agent, cut, Layer::kState, "load:jobs");
                auto held = std::make_shared<SlotLimiter::Slot>(std::move(*slot));
                ctx.scheduler.at(t + kWorkMs, [&ctx, agent, decision_id, jobs, window, attempt,
                                               held] {
                    DecisionRecord d;
                    d.decision_id = decision_id;
                    d.agent_id = agent;
                    d.premises = {jobs.premise};
                    d.decided_at = ctx.clock.now();
                    std::string key =
                        "load:w" + std::to_string(window) + ":a" + std::to_string(attempt);
                    d.effects = {{Effect::Kind::kStateWrite, key}};
                    decide_gated(ctx, d, [&ctx, key, agent](Transaction& tx) {
                        ctx.store.update_state(tx, key, expect_absent("done"), agent);
                    });
                });
            });
        }
    }
}

// ---------------------------------------------------------------------------
// failure_matrix
// ---------------------------------------------------------------------------

// Coherent-but-stale reality: a pipeline delivers data retrieved long before
// the decision. With delta enforced these decisions are rejected as stale;
// with delta unbounded they are admitted and wrong against decision-time
// truth.
void schedule_stale_workload(Ctx& ctx, std::uint64_t base) {
    ctx.scheduler.at(base, [&ctx] {
        Transaction tx = ctx.kernel.begin_tx();
        ctx.store.append_episode_in(tx, "feed:prices", ctx.clock.now(),
                                    "price feed start nonce:" + ctx.nonce());
        ctx.store.update_state(tx, "metric:price", expect_absent("100"), "feed:prices");
        feed_commit(ctx, tx, "feed:prices");
    });
    for (int k = 1; k <= 20; ++k) {
        ctx.scheduler.at(base + 10 * k, [&ctx, k] {
            Transaction tx = ctx.kernel.begin_tx();
            ctx.store.update_state(tx, "metric:price",
                                   expect_value(std::to_string(100 + k - 1),
                                                std::to_string(100 + k)),
                                   "feed:prices");
            feed_commit(ctx, tx, "feed:prices");
        });
    }

    auto pinned = std::make_shared<std::optional<Retrieved>>();
    ctx.scheduler.at(base + 5, [&ctx, pinned] {
        *pinned = retrieve_point(ctx, "agent:quoter", ctx.kernel.begin_snapshot(), Layer::kState,
                                 "metric:price");
    });

    for (int k = 0; k < 3; ++k) {
        ctx.scheduler.at(base + 150 + 50 * k, [&ctx, pinned, k] {
            if (!*pinned) return;
            const Retrieved& price = **pinned;
            DecisionRecord d;
            d.decision_id = "fm-stale-quote" + std::to_string(k);
            d.agent_id = "agent:quoter";
            d.premises = {price.premise};
            d.decided_at = ctx.clock.now();
            std::string key = "quote:q" + std::to_string(k);
            d.effects = {{Effect::Kind::kStateWrite, key}};
            std::string quoted = price.text_or("");
            DecisionOutcome outcome =
                decide_gated(ctx, d, [&ctx, key, quoted](Transaction& tx) {
                    ctx.store.update_state(tx, key, expect_absent(quoted), "agent:quoter");
                });
            if (outcome.committed) {
                std::optional<Bytes> truth = ctx.kernel.read(
                    ctx.kernel.cut_at_or_before(d.decided_at), Layer::kState, "metric:price");
                if (truth != price.value) {
                    ++ctx.symptoms.stale_coherent_invalid;
                    ctx.invalid.push_back({d.decision_id,
                                           "quoted " + quoted + " but decision-time price was " +
                                               truth.value_or("absent")});
                }
            }
        });
    }
}

// Correct transactions that cannot complete within decision windows under
// load: a single-server queue at twice its service rate. Without admission
// control the backlog pushes premise ages past delta; with it the excess is
// shed at arrival and admitted work stays inside the window.
void schedule_overload_workload(Ctx& ctx, std::uint64_t base) {
    constexpr std::uint64_t kServiceMs = 10;
    constexpr int kArrivals = 40;

    ctx.scheduler.at(base, [&ctx] {
        Transaction tx = ctx.kernel.begin_tx();
        ctx.store.append_episode_in(tx, "feed:setup", ctx.clock.now(),
                                    "service open nonce:" + ctx.nonce());
        ctx.store.update_state(tx, "svc:queue", expect_absent("open"), "feed:setup");
        feed_commit(ctx, tx, "feed:setup");
    });

    auto server_free_at = std::make_shared<std::uint64_t>(base);
    for (int i = 0; i < kArrivals; ++i) {
        std::uint64_t arrival = base + 5 + 5 * i;
        ctx.scheduler.at(arrival, [&ctx, server_free_at, i, arrival] {
            std::string agent = "agent:svc" + std::to_string(i);
            std::string decision_id = "fm-load-job" + std::to_string(i);
            auto slot = ctx.limiter.try_acquire();
            if (!slot) {
                ctx.metrics.record_over_envelope();
                ctx.trace.append(TraceKind::kAbort, ctx.now_ms(),
                                 {{"agent", agent},
                                  {"decision_id", decision_id},
                                  {"reason", "OverEnvelope"}});
                return;
            }
            Retrieved queue = retrieve_point(ctx, agent, ctx.kernel.begin_snapshot(),
                                             Layer::kState, "svc:queue");
            std::uint64_t start = std::max(*server_free_at, arrival);
            std::uint64_t end = start + kServiceMs;
            *server_free_at = end;
            auto held = std::make_shared<SlotLimiter::Slot>(std::move(*slot));
            ctx.scheduler.at(end, [&ctx, agent, decision_id, queue, i, arrival, held] {
                DecisionRecord d;
                d.decision_id = decision_id;
                d.agent_id = agent;
                d.premises = {queue.premise};
                d.decided_at = ctx.clock.now();
                std::string key = "svc:job" + std::to_string(i);
                d.effects = {{Effect::Kind::kStateWrite, key}};
                if (d.decided_at.millis - arrival >= ctx.config.delta_ms) {
                    ++ctx.symptoms.envelope_window_misses;
                }
                decide_gated(ctx, d, [&ctx, key, agent](Transaction& tx) {
                    ctx.store.update_state(tx, key, expect_absent("done"), agent);
                });
            });
        });
    }
}

// Fast but incoherent views: per-key latest reads straddling a concurrent
// transfer observe a pair of values that never coexisted. With snapshot
// reads the pair always sums to the invariant.
void schedule_incoherent_workload(Ctx& ctx, std::uint64_t base, bool degraded) {
    ctx.scheduler.at(base, [&ctx] {
        Transaction tx = ctx.kernel.begin_tx();
        ctx.store.append_episode_in(tx, "feed:setup", ctx.clock.now(),
                                    "accounts open nonce:" + ctx.nonce());
        ctx.store.update_state(tx, "acct:a", expect_absent("50"), "feed:setup");
        ctx.store.update_state(tx, "acct:b", expect_absent("50"), "feed:setup");
        feed_commit(ctx, tx, "feed:setup");
    });
    for (int k = 1; k <= 6; ++k) {
        ctx.scheduler.at(base + 10 * k, [&ctx, k] {
            Transaction tx = ctx.kernel.begin_tx();
            ctx.store.update_state(tx, "acct:a",
                                   expect_value(std::to_string(50 - 5 * (k - 1)),
                                                std::to_string(50 - 5 * k)),
                                   "feed:transfers");
            ctx.store.update_state(tx, "acct:b",
                                   expect_value(std::to_string(50 + 5 * (k - 1)),
                                                std::to_string(50 + 5 * k)),
                                   "feed:transfers");
            feed_commit(ctx, tx, "feed:transfers");
        });
    }

    for (int k = 0; k < 3; ++k) {
        std::string agent = "agent:auditor" + std::to_string(k);
        if (degraded) {
            // Two latest-value reads 7 ms apart; a transfer commits between
            // them.
            auto first = std::make_shared<std::optional<Retrieved>>();
            ctx.scheduler.at(base + 10 * k + 15, [&ctx, first, agent] {
                *first = retrieve_point(ctx, agent, ctx.kernel.begin_snapshot(), Layer::kState,
                                        "acct:a");
            });
            ctx.scheduler.at(base + 10 * k + 22, [&ctx, first, agent, k] {
                if (!*first) return;
                Retrieved a = **first;
                Retrieved b = retrieve_point(ctx, agent, ctx.kernel.begin_snapshot(),
                                             Layer::kState, "acct:b");
                long sum = a.number_or(0) + b.number_or(0);
                DecisionRecord d;
                d.decision_id = "fm-audit-pair" + std::to_string(k);
                d.agent_id = agent;
                d.premises = {a.premise, b.premise};
                d.decided_at = ctx.clock.now();
                std::string key = "audit:p" + std::to_string(k);
                d.effects = {{Effect::Kind::kStateWrite, key}};
                DecisionOutcome outcome = decide_gated(
                    ctx, d, [&ctx, key, sum, agent](Transaction& tx) {
                        ctx.store.update_state(tx, key,
                                               expect_absent("sum=" + std::to_string(sum)),
                                               agent);
                    });
                std::set<std::uint64_t> cuts;
                for (const PremiseRef& premise : d.premises) cuts.insert(premise.cut.value);
                if (outcome.committed && cuts.size() >= 2) {
                    ++ctx.symptoms.mixed_cut_decisions;
                    if (sum != 100) {
                        ctx.invalid.push_back(
                            {d.decision_id, "observed pair sums to " + std::to_string(sum) +
                                                ", no cut ever held it"});
                    }
                }
            });
        } else {
            ctx.scheduler.at(base + 10 * k + 22, [&ctx, agent, k] {
                CutId cut = ctx.kernel.begin_snapshot();
                Retrieved a = retrieve_point(ctx, agent, cut, Layer::kState, "acct:a");
                Retrieved b = retrieve_point(ctx, agent, cut, Layer::kState, "acct:b");
                long sum = a.number_or(0) + b.number_or(0);
                DecisionRecord d;
                d.decision_id = "fm-audit-pair" + std::to_string(k);
                d.agent_id = agent;
                d.premises = {a.premise, b.premise};
                d.decided_at = ctx.clock.now();
                std::string key = "audit:p" + std::to_string(k);
                d.effects = {{Effect::Kind::kStateWrite, key}};
                decide_gated(ctx, d, [&ctx, key, sum, agent](Transaction& tx) {
                    ctx.store.update_state(tx, key, expect_absent("sum=" + std::to_string(sum)),
                                           agent);
                });
            });
        }
    }
}

// Identical data, incompatible interpretations: reviewers applying private
// rules to the same episode reach opposite conclusions. The governed path
// routes both through one registered transformation and a shared prototype
// set.
void schedule_implicit_workload(Ctx& ctx, std::uint64_t base, bool degraded) {
    auto payment_seq = std::make_shared<std::uint64_t>(0);
    ctx.scheduler.at(base, [&ctx, payment_seq] {
        Transaction tx = ctx.kernel.begin_tx();
        *payment_seq = ctx.store.append_episode_in(
            tx, "feed:payments", ctx.clock.now(),
            "payment P99 amount 4900 new device login burst region mismatch nonce:" + ctx.nonce());
        feed_commit(ctx, tx, "feed:payments");
    });

    if (!degraded) {
        register_scenario_transformations("failure_matrix", ctx.registry);
        ctx.scheduler.at(base + 5, [&ctx, payment_seq] {
            TransformationRunner runner(ctx.store, ctx.registry);
            CutId cut = runner.run("risk_signals", 1, {*payment_seq});
            ctx.trace.append(TraceKind::kCommit, ctx.now_ms(),
                             {{"tx_id", 0},
                              {"actor", "agent:risk"},
                              {"snapshot_cut", cut.value - 1},
                              {"commit_cut", cut.value},
                              {"reads", nlohmann::json::array()},
                              {"writes", writes_json({PendingWrite{
                                   Layer::kSemantic, "sem:risk:P99",
                                   ctx.kernel.read(cut, Layer::kSemantic, "sem:risk:P99"),
                                   std::nullopt}})}});
        });
    }

    PrototypeSet risk_prototypes;
    risk_prototypes.set_prototype("deny", "account takeover precursor high risk payment deny");
    risk_prototypes.set_prototype("approve", "routine verified payment approve low risk");

    for (int r = 0; r < 2; ++r) {
        std::string agent = "agent:reviewer" + std::to_string(r);
        ctx.scheduler.at(base + 10 + r, [&ctx, payment_seq, degraded, agent, r,
                                         risk_prototypes] {
            CutId cut = ctx.kernel.begin_snapshot();
            Retrieved payment = retrieve_point(ctx, agent, cut, Layer::kEpisodic,
                                               MemoryStore::episodic_key(*payment_seq));
            DecisionRecord d;
            d.decision_id = "fm-review-r" + std::to_string(r);
            d.agent_id = agent;
            d.premises = {payment.premise};
            d.decided_at = ctx.clock.now();

            std::string conclusion;
            if (degraded) {
                // Private, divergent heuristics over the same observation.
                conclusion = (r == 0) ? "deny" : "approve";
                d.opaque_context_declared = true;
            } else {
                Retrieved risk = retrieve_point(ctx, agent, cut, Layer::kSemantic, "sem:risk:P99");
                d.premises.push_back(risk.premise);
                std::vector<std::string> labels = {"deny", "approve"};
                auto record = risk.value
                                  ? MemoryStore::decode_semantic("sem:risk:P99", *risk.value)
                                  : std::nullopt;
                conclusion = record ? classify(risk_prototypes, record->interpretation, labels)
                                    : "approve";
            }

            std::string key = "review:P99:r" + std::to_string(r);
            d.effects = {{Effect::Kind::kStateWrite, key}};
            decide_gated(ctx, d, [&ctx, key, conclusion, agent](Transaction& tx) {
                ctx.store.update_state(tx, key, expect_absent(conclusion), agent);
            });
        });
    }

    ctx.scheduler.at(base + 20, [&ctx] {
        CutId cut = ctx.kernel.begin_snapshot();
        std::optional<Bytes> r0 = ctx.kernel.read(cut, Layer::kState, "review:P99:r0");
        std::optional<Bytes> r1 = ctx.kernel.read(cut, Layer::kState, "review:P99:r1");
        if (r0 && r1 && *r0 != *r1) {
            ++ctx.symptoms.divergent_interpretations;
            ctx.invalid.push_back({"fm-review-r1", "reviewers disagreed on identical data: " +
                                                       *r0 + " vs " + *r1});
        }
    });
}

void schedule_failure_matrix(Ctx& ctx) {
    const std::string& variant = ctx.config.variant;
    if (variant == "stale" || variant == "full") schedule_stale_workload(ctx, 10'000);
    if (variant == "overload" || variant == "full") schedule_overload_workload(ctx, 20'000);
    if (variant == "incoherent" || variant == "full") {
        schedule_incoherent_workload(ctx, 30'000, variant == "incoherent");
    }
    if (variant == "implicit" || variant == "full") {
        schedule_implicit_workload(ctx, 40'000, variant == "implicit");
    }
}

}  // namespace

void Scheduler::at(std::uint64_t time_ms, std::function<void()> fn) {
    queue_.insert(Item{time_ms, next_sequence_++, std::move(fn)});
}

std::optional<Scheduler::StepInfo> Scheduler::step() {
    if (queue_.empty()) return std::nullopt;
    auto node = queue_.extract(queue_.begin());
    Item& item = node.value();
    clock_.advance_to(LogicalTime{item.time_ms});
    item.fn();
    return StepInfo{item.time_ms, item.sequence};
}

void Scheduler::run() {
    while (step()) {
    }
}

void register_scenario_transformations(const std::string& scenario,
                                       TransformationRegistry& registry) {
    if (scenario == "checkout") {
        registry.register_transformation(behavior_patterns_v1());
    } else if (scenario == "failure_matrix") {
        registry.register_transformation(risk_signals_v1());
    }
}

nlohmann::json Symptoms::to_json() const {
    return {{"stale_coherent_invalid", stale_coherent_invalid},
            {"envelope_window_misses", envelope_window_misses},
            {"mixed_cut_decisions", mixed_cut_decisions},
            {"divergent_interpretations", divergent_interpretations}};
}

std::string RunResult::trace_text() const {
    std::string out;
    for (const TraceEvent& event : trace) {
        out += event.to_line();
        out += '\n';
    }
    return out;
}

RunResult run_scenario(const RunConfig& config, const PersistPaths* persist) {
    config.validate();
    if ((config.scenario == "load_sweep" || config.scenario == "failure_matrix") &&
        config.mode != "contextlake") {
        throw Error(ErrorCode::kInvalidConfig,
                    config.scenario + " is only defined for contextlake mode");
    }

    Ctx ctx(config);
    if (persist) {
        ctx.kernel.set_episodic_log(persist->episodic_log);
        ctx.store.set_transform_log(persist->transform_log);
    }
    ctx.trace.append(TraceKind::kMeta, 0,
                     {{"config", config.to_json()},
                      {"gate_checks", checks_json(checks_for(config))},
                      {"effective_delta_ms", stale_delta(config)}});

    if (config.scenario == "warehouse") {
        schedule_warehouse(ctx);
    } else if (config.scenario == "checkout") {
        schedule_checkout(ctx);
    } else if (config.scenario == "load_sweep") {
        schedule_load_sweep(ctx);
    } else if (config.scenario == "failure_matrix") {
        schedule_failure_matrix(ctx);
    } else {
        throw Error(ErrorCode::kUnknownScenario, "unknown scenario '" + config.scenario + "'");
    }

    ctx.scheduler.run();
    ctx.metrics.record_peak(ctx.limiter.peak_in_flight());

    RunResult result;
    result.config = config;
    result.trace = ctx.trace.events();
    result.metrics = ctx.metrics.snapshot();
    result.invalid_outcomes = std::move(ctx.invalid);
    result.symptoms = ctx.symptoms;
    CutId final_cut = ctx.kernel.begin_snapshot();
    result.final_episodic = ctx.kernel.layer_contents(final_cut, Layer::kEpisodic);
    result.final_semantic = ctx.kernel.layer_contents(final_cut, Layer::kSemantic);
    result.final_state = ctx.kernel.layer_contents(final_cut, Layer::kState);
    return result;
}

}  // namespace ctxlake
