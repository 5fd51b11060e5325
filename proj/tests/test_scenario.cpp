#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ctxlake/base64.hpp"
#include "ctxlake/scenario.hpp"

using namespace ctxlake;
using nlohmann::json;

namespace {

std::vector<const TraceEvent*> events_of(const RunResult& r, TraceKind kind) {
    std::vector<const TraceEvent*> out;
    for (const TraceEvent& event : r.trace) {
        if (event.kind == kind) out.push_back(&event);
    }
    return out;
}

const TraceEvent* find_decision(const RunResult& r, const std::string& id) {
    for (const TraceEvent& event : r.trace) {
        if (event.kind == TraceKind::kDecision && event.fields.value("decision_id", "") == id) {
            return &event;
        }
    }
    return nullptr;
}

const TraceEvent* find_commit_for(const RunResult& r, const std::string& decision_id) {
    for (const TraceEvent& event : r.trace) {
        if (event.kind == TraceKind::kCommit &&
            event.fields.value("decision_id", "") == decision_id) {
            return &event;
        }
    }
    return nullptr;
}

std::optional<std::string> committed_value(const RunResult& r, const std::string& key) {
    std::optional<std::string> value;
    for (const TraceEvent& event : r.trace) {
        if (event.kind != TraceKind::kCommit) continue;
        for (const json& write : event.fields.value("writes", json::array())) {
            if (write.value("key", "") != key) continue;
            if (write.value("deleted", false)) {
                value = std::nullopt;
            } else {
                value = base64_decode(write.at("value_b64").get<std::string>());
            }
        }
    }
    return value;
}

RunConfig make_config(const std::string& scenario, const std::string& mode = "contextlake",
                      std::uint64_t seed = 7) {
    RunConfig config;
    config.scenario = scenario;
    config.mode = mode;
    config.seed = seed;
    return config;
}

}  // namespace

TEST_CASE("scheduler executes in (time, insertion) order and advances the clock") {
    SimulatedClock clock;
    Scheduler scheduler(clock);
    CHECK_FALSE(scheduler.step().has_value());  // empty queue

    std::vector<int> order;
    scheduler.at(50, [&order] { order.push_back(2); });
    scheduler.at(10, [&order] { order.push_back(1); });
    scheduler.at(50, [&order] { order.push_back(3); });  // same time, later insertion

    auto first = scheduler.step();
    REQUIRE(first.has_value());
    CHECK(first->time_ms == 10);
    CHECK(clock.now() == LogicalTime{10});

    scheduler.run();
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK(clock.now() == LogicalTime{50});
}

TEST_CASE("warehouse in Context Lake mode reproduces the reference timeline") {
    RunResult r = run_scenario(make_config("warehouse"));

    // Correction committed at 14:23:18.310.
    const TraceEvent* correction = find_commit_for(r, "wh-inventory-apply");
    REQUIRE(correction);
    CHECK(correction->time_ms == 51'798'310);

    // Shipping Agent's read at .350 sees 1 unit.
    bool saw_one_unit = false;
    for (const TraceEvent* event : events_of(r, TraceKind::kRetrieval)) {
        if (event->time_ms == 51'798'350 && event->fields.value("key", "") == "inv:SKU1") {
            saw_one_unit = base64_decode(event->fields.at("value_b64").get<std::string>()) == "1";
        }
    }
    CHECK(saw_one_unit);

    // Escalation decision at .400, admitted and committed.
    const TraceEvent* escalate = find_decision(r, "wh-shipping-escalate");
    REQUIRE(escalate);
    CHECK(escalate->time_ms == 51'798'400);
    REQUIRE(find_commit_for(r, "wh-shipping-escalate"));
    CHECK(committed_value(r, "order:O1:status") == std::string("escalated"));

    CHECK(r.invalid_outcomes.empty());
    CHECK(r.metrics.decisions == 3);
    CHECK(r.metrics.admitted == 3);
    CHECK(r.metrics.violations_by_code.empty());
    CHECK_FALSE(r.symptoms.any());
}

TEST_CASE("warehouse in composed mode with replica lag commits the invalid order") {
    RunConfig config = make_config("warehouse", "composed");
    config.lags["replica"] = 60;
    RunResult r = run_scenario(config);

    REQUIRE(r.invalid_outcomes.size() == 1);
    CHECK(r.invalid_outcomes[0].decision_id == "wh-shipping-allocate");
    CHECK(committed_value(r, "order:O1:status") == std::string("allocated:2"));

    // The invalid order goes through at .350: the stale replica made the
    // stock look sufficient, so nothing held the agent back.
    const TraceEvent* invalid_commit = find_commit_for(r, "wh-shipping-allocate");
    REQUIRE(invalid_commit);
    CHECK(invalid_commit->time_ms == 51'798'350);

    // Shipping premises span cuts: fresh orders subsystem, lagged inventory.
    const TraceEvent* decision = find_decision(r, "wh-shipping-allocate");
    REQUIRE(decision);
    std::set<std::uint64_t> cuts;
    for (const json& premise : decision->fields.at("premises")) {
        cuts.insert(premise.at("cut").get<std::uint64_t>());
    }
    CHECK(cuts.size() >= 2);

    // Lag 0 degenerates to the kernel view: escalation, no invalid order.
    config.lags["replica"] = 0;
    RunResult degenerate = run_scenario(config);
    CHECK(degenerate.invalid_outcomes.empty());
    CHECK(find_decision(degenerate, "wh-shipping-escalate"));
}

TEST_CASE("checkout holds the flagged purchase only with shared context") {
    RunResult lake = run_scenario(make_config("checkout"));
    const TraceEvent* hold = find_decision(lake, "co-hold-review");
    REQUIRE(hold);
    bool cites_pattern = false;
    for (const json& premise : hold->fields.at("premises")) {
        if (premise.value("key", "") == "sem:behavior:acct:42" &&
            premise.value("premise_kind", "") == "semantic") {
            cites_pattern = true;
        }
    }
    CHECK(cites_pattern);
    CHECK(committed_value(lake, "order:O9:status") == std::string("hold_review"));
    CHECK(lake.invalid_outcomes.empty());

    RunResult composed = run_scenario(make_config("checkout", "composed"));
    REQUIRE(find_decision(composed, "co-authorize-ship"));
    CHECK(committed_value(composed, "order:O9:status") == std::string("shipped"));
    REQUIRE(composed.invalid_outcomes.size() == 1);
    CHECK(composed.invalid_outcomes[0].decision_id == "co-authorize-ship");
}

TEST_CASE("prototype overrides from the config drive classification") {
    // Replace the precursor prototype with unrelated text: the pattern no
    // longer classifies as a precursor, so even the coherent architecture
    // authorizes (and the audit shows what that costs).
    RunConfig config = make_config("checkout");
    config.prototypes["direct-arrival-no-browse"] = "completely unrelated words entirely";
    RunResult r = run_scenario(config);
    CHECK(find_decision(r, "co-authorize-ship"));
    CHECK(committed_value(r, "order:O9:status") == std::string("shipped"));
}

TEST_CASE("load sweep sheds exactly the over-envelope half") {
    RunConfig config = make_config("load_sweep");
    config.max_concurrent = 4;
    RunResult r = run_scenario(config);

    std::uint64_t attempts = r.metrics.decisions + r.metrics.over_envelope;
    CHECK(attempts == 80);  // 10 windows x 2C
    CHECK(r.metrics.over_envelope == 40);
    CHECK(r.metrics.decisions == 40);
    CHECK(r.metrics.admitted == 40);
    CHECK(r.metrics.peak_in_flight == 4);
    CHECK(r.metrics.violations_by_code.empty());
}

TEST_CASE("failure matrix variants exhibit exactly their own symptom") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        RunConfig config = make_config("failure_matrix", "contextlake", seed);

        config.variant = "stale";
        Symptoms stale = run_scenario(config).symptoms;
        CHECK(stale.stale_coherent_invalid > 0);
        CHECK(stale.envelope_window_misses == 0);
        CHECK(stale.mixed_cut_decisions == 0);
        CHECK(stale.divergent_interpretations == 0);

        config.variant = "overload";
        Symptoms overload = run_scenario(config).symptoms;
        CHECK(overload.envelope_window_misses > 0);
        CHECK(overload.stale_coherent_invalid == 0);

        config.variant = "incoherent";
        Symptoms incoherent = run_scenario(config).symptoms;
        CHECK(incoherent.mixed_cut_decisions > 0);
        CHECK(incoherent.divergent_interpretations == 0);

        config.variant = "implicit";
        Symptoms implicit = run_scenario(config).symptoms;
        CHECK(implicit.divergent_interpretations > 0);
        CHECK(implicit.mixed_cut_decisions == 0);

        config.variant = "full";
        RunResult full = run_scenario(config);
        CHECK_FALSE(full.symptoms.any());
        CHECK(full.invalid_outcomes.empty());
    }
}

TEST_CASE("identical (scenario, config, seed) produces byte-identical traces") {
    for (const std::string& scenario : {std::string("warehouse"), std::string("checkout"),
                                        std::string("load_sweep")}) {
        RunConfig config = make_config(scenario, "contextlake", 99);
        CHECK(run_scenario(config).trace_text() == run_scenario(config).trace_text());
    }
    RunConfig fm = make_config("failure_matrix", "contextlake", 99);
    fm.variant = "full";
    CHECK(run_scenario(fm).trace_text() == run_scenario(fm).trace_text());

    // Different seeds vary the trace (payload nonces, attempt order).
    RunConfig a = make_config("warehouse", "contextlake", 1);
    RunConfig b = make_config("warehouse", "contextlake", 2);
    CHECK(run_scenario(a).trace_text() != run_scenario(b).trace_text());
}

TEST_CASE("every admitted decision commits and every rejected one does not") {
    std::vector<RunConfig> configs;
    configs.push_back(make_config("warehouse"));
    configs.push_back(make_config("checkout"));
    RunConfig fm = make_config("failure_matrix");
    fm.variant = "overload";
    configs.push_back(fm);

    for (const RunConfig& config : configs) {
        RunResult r = run_scenario(config);
        std::map<std::string, bool> verdicts;
        for (const TraceEvent* event : events_of(r, TraceKind::kVerdict)) {
            verdicts[event->fields.at("decision_id").get<std::string>()] =
                event->fields.at("admitted").get<bool>();
        }
        for (const auto& [id, admitted] : verdicts) {
            const TraceEvent* commit = find_commit_for(r, id);
            CAPTURE(id);
            CHECK(admitted == (commit != nullptr));
        }
        // External actions only ever come from admitted decisions.
        for (const TraceEvent* event : events_of(r, TraceKind::kExternalAction)) {
            std::string id = event->fields.at("decision_id").get<std::string>();
            CHECK(verdicts[id]);
        }
    }
}

TEST_CASE("scenario and config validation errors") {
    RunConfig config = make_config("nosuch");
    CHECK_THROWS_AS(run_scenario(config), Error);
    try {
        run_scenario(config);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kUnknownScenario);
    }

    RunConfig bad_mode = make_config("load_sweep", "composed");
    CHECK_THROWS_AS(run_scenario(bad_mode), Error);

    RunConfig bad_variant = make_config("failure_matrix");
    bad_variant.variant = "wat";
    CHECK_THROWS_AS(run_scenario(bad_variant), Error);

    RunConfig stray_variant = make_config("warehouse");
    stray_variant.variant = "full";
    CHECK_THROWS_AS(run_scenario(stray_variant), Error);
}

TEST_CASE("config JSON round-trips and rejects unknown fields") {
    json j = {{"scenario", "warehouse"}, {"mode", "composed"}, {"delta_ms", 50},
              {"max_concurrent", 2},     {"seed", 11},         {"lags", {{"replica", 60}}}};
    RunConfig config = RunConfig::from_json(j);
    CHECK(config.scenario == "warehouse");
    CHECK(config.lag("replica") == 60);
    CHECK(RunConfig::from_json(config.to_json()).to_json() == config.to_json());

    json unknown = j;
    unknown["turbo"] = true;
    CHECK_THROWS_AS(RunConfig::from_json(unknown), Error);

    json bad_lag = j;
    bad_lag["lags"] = {{"warp", 9}};
    CHECK_THROWS_AS(RunConfig::from_json(bad_lag), Error);
}
