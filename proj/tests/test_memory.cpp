#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include <json.hpp>

#include "ctxlake/base64.hpp"
#include "ctxlake/memory.hpp"
#include "ctxlake/semantic.hpp"

using namespace ctxlake;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    SimulatedClock clock;
    TransformationRegistry registry;
    Kernel kernel{clock};
    MemoryStore store{kernel, clock, registry};
};

Transformation uppercase_transform(std::uint32_t version) {
    return Transformation{
        "upper", version, [version](const std::vector<Episode>& episodes) {
            std::vector<SemanticRecord> records;
            for (const Episode& e : episodes) {
                Bytes text = e.payload;
                for (char& c : text) c = static_cast<char>(std::toupper(c));
                if (version >= 2) text += "!";
                records.push_back({"sem:upper:" + std::to_string(e.seq), text, "upper", version,
                                   {e.seq}, CutId{}});
            }
            return records;
        }};
}

fs::path temp_file(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("ctxlake_memory_" + name);
    fs::remove(p);
    return p;
}

}  // namespace

TEST_CASE("episodes are sequence-numbered in append order") {
    Fixture f;
    CHECK(f.store.append_episode("feed", LogicalTime{10}, "first") == 1);
    CHECK(f.store.append_episode("feed", LogicalTime{11}, "second") == 2);
    CHECK(f.store.append_episode("agent:restocking", LogicalTime{12},
                                 "return unit defective, SKU1") == 3);

    std::optional<Episode> episode = f.store.episode(f.kernel.begin_snapshot(), 3);
    REQUIRE(episode);
    CHECK(episode->seq == 3);
    CHECK(episode->source == "agent:restocking");
    CHECK(episode->observed_at == LogicalTime{12});
    CHECK(episode->payload == "return unit defective, SKU1");
    CHECK(f.store.max_seq() == 3);
}

TEST_CASE("episode values survive encode/decode with binary payloads") {
    Fixture f;
    Bytes payload = "obs\x00\xff\x7f";
    payload.push_back('\x01');
    std::uint64_t seq = f.store.append_episode("s", LogicalTime{5}, payload);
    std::optional<Episode> episode = f.store.episode(f.kernel.begin_snapshot(), seq);
    REQUIRE(episode);
    CHECK(episode->payload == payload);
}

TEST_CASE("semantic writes require registered provenance") {
    Fixture f;
    std::uint64_t seq = f.store.append_episode("feed", LogicalTime{1}, "hello");

    Transaction tx = f.kernel.begin_tx();
    SemanticRecord record{"sem:x", "HELLO", "upper", 1, {seq}, CutId{}};
    CHECK_THROWS_AS(f.store.write_semantic(tx, record), Error);
    try {
        f.store.write_semantic(tx, record);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kUnregisteredTransform);
    }

    f.registry.register_transformation(uppercase_transform(1));
    f.store.write_semantic(tx, record);

    // Buffered, invisible until commit.
    CHECK(f.kernel.read(f.kernel.begin_snapshot(), Layer::kSemantic, "sem:x") == std::nullopt);
    CutId cut = f.kernel.commit_tx(tx);
    std::optional<SemanticRecord> stored = f.store.read_semantic(cut, "sem:x");
    REQUIRE(stored);
    CHECK(stored->interpretation == "HELLO");
    CHECK(stored->transform_id == "upper");
    CHECK(stored->transform_version == 1);
    CHECK(stored->sources == std::vector<std::uint64_t>{seq});
    CHECK(stored->produced_at_cut == cut);
}

TEST_CASE("semantic writes reject unknown source episodes and empty provenance") {
    Fixture f;
    f.registry.register_transformation(uppercase_transform(1));
    Transaction tx = f.kernel.begin_tx();

    SemanticRecord missing_source{"sem:x", "X", "upper", 1, {42}, CutId{}};
    CHECK_THROWS_AS(f.store.write_semantic(tx, missing_source), Error);
    try {
        f.store.write_semantic(tx, missing_source);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kUnknownSourceEpisode);
    }

    SemanticRecord no_sources{"sem:x", "X", "upper", 1, {}, CutId{}};
    CHECK_THROWS_AS(f.store.write_semantic(tx, no_sources), Error);
}

TEST_CASE("re-interpretation supersedes without touching episodes") {
    Fixture f;
    f.registry.register_transformation(uppercase_transform(1));
    std::uint64_t seq = f.store.append_episode("feed", LogicalTime{1}, "hello");

    TransformationRunner runner(f.store, f.registry);
    CutId v1_cut = runner.run("upper", 1, {seq});

    f.registry.register_transformation(uppercase_transform(2));
    CHECK_THROWS_AS(f.registry.register_transformation(uppercase_transform(2)), Error);
    CutId v2_cut = runner.run("upper", 2, {seq});

    std::string key = "sem:upper:" + std::to_string(seq);
    std::optional<SemanticRecord> v1 = f.store.read_semantic(v1_cut, key);
    std::optional<SemanticRecord> v2 = f.store.read_semantic(v2_cut, key);
    REQUIRE(v1);
    REQUIRE(v2);
    CHECK(v1->interpretation == "HELLO");
    CHECK(v1->transform_version == 1);
    CHECK(v2->interpretation == "HELLO!");
    CHECK(v2->transform_version == 2);

    // The source episode is byte-identical at every cut where it exists.
    for (std::uint64_t c = 1; c <= f.kernel.begin_snapshot().value; ++c) {
        std::optional<Episode> episode = f.store.episode(CutId{c}, seq);
        if (episode) CHECK(episode->payload == "hello");
    }
}

TEST_CASE("state transitions are guarded by preconditions and hooks") {
    Fixture f;
    f.store.register_state_validator(
        "inv:", [](std::string_view, const std::optional<Bytes>&,
                   const std::optional<Bytes>& next) -> std::optional<std::string> {
            if (next && !next->empty() && (*next)[0] == '-') return "negative inventory";
            return std::nullopt;
        });

    auto expect = [](Bytes want) {
        return [want](const std::optional<Bytes>& v) { return v == want; };
    };

    // Seed: 2 units on hand.
    Transaction seed = f.kernel.begin_tx();
    f.store.update_state(seed, "inv:SKU1",
                         {[](const std::optional<Bytes>& v) { return !v; }, Bytes("2")}, "setup");
    f.kernel.commit_tx(seed);

    // Correction 2 -> 1.
    Transaction correct = f.kernel.begin_tx();
    f.store.update_state(correct, "inv:SKU1", {expect("2"), Bytes("1")}, "agent:inventory");
    CutId corrected = f.kernel.commit_tx(correct);
    CHECK(f.kernel.read(corrected, Layer::kState, "inv:SKU1") == Bytes("1"));

    // A transition requiring 2 units now fails its precondition.
    Transaction take2 = f.kernel.begin_tx();
    CHECK_THROWS_AS(
        f.store.update_state(take2, "inv:SKU1", {expect("2"), Bytes("0")}, "agent:shipping"),
        Error);
    try {
        f.store.update_state(take2, "inv:SKU1", {expect("2"), Bytes("0")}, "agent:shipping");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kTransitionRejected);
    }

    // The validation hook rejects 1 -> -1 at commit.
    Transaction negative = f.kernel.begin_tx();
    f.store.update_state(negative, "inv:SKU1", {expect("1"), Bytes("-1")}, "agent:shipping");
    CHECK_THROWS_AS(f.kernel.commit_tx(negative), Error);
    CHECK(f.kernel.read(f.kernel.begin_snapshot(), Layer::kState, "inv:SKU1") == Bytes("1"));
}

TEST_CASE("direct semantic writes bypassing the registry are rejected") {
    Fixture f;
    f.registry.register_transformation(uppercase_transform(1));
    std::uint64_t seq = f.store.append_episode("feed", LogicalTime{1}, "x");

    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        Transaction tx = f.kernel.begin_tx();
        std::string key = "sem:fuzz:" + std::to_string(i);
        Bytes value;
        switch (rng() % 4) {
            case 0: value = "plain text, no provenance"; break;
            case 1:
                value = nlohmann::json{{"interpretation_b64", base64_encode("x")},
                                       {"sources", {seq}},
                                       {"transform_id", "adhoc"},
                                       {"transform_version", 1}}
                            .dump();
                break;
            case 2:
                value = nlohmann::json{{"interpretation_b64", base64_encode("x")},
                                       {"sources", nlohmann::json::array()},
                                       {"transform_id", "upper"},
                                       {"transform_version", 1}}
                            .dump();
                break;
            case 3: value = "{\"broken\": tru"; break;
        }
        f.kernel.tx_write(tx, Layer::kSemantic, key, value);
        CHECK_THROWS_AS(f.kernel.commit_tx(tx), Error);
    }
    CHECK(f.kernel.layer_contents(f.kernel.begin_snapshot(), Layer::kSemantic).empty());

    // The same writes pass when authority enforcement is switched off (the
    // degraded configuration used to model ungoverned systems).
    SimulatedClock clock2;
    Kernel kernel2(clock2);
    MemoryStore ungoverned(kernel2, clock2, f.registry, {.enforce_semantic_authority = false});
    (void)ungoverned;
    Transaction tx = kernel2.begin_tx();
    kernel2.tx_write(tx, Layer::kSemantic, "sem:adhoc", "private interpretation");
    CHECK_NOTHROW(kernel2.commit_tx(tx));
}

TEST_CASE("episodic + transform logs rebuild semantic and state layers exactly") {
    fs::path episodic_log = temp_file("rebuild_ep.jsonl");
    fs::path transform_log = temp_file("rebuild_tf.jsonl");

    SimulatedClock clock(100);
    TransformationRegistry registry;
    registry.register_transformation(uppercase_transform(1));
    registry.register_transformation(uppercase_transform(2));

    Kernel kernel(clock);
    kernel.set_episodic_log(episodic_log);
    MemoryStore store(kernel, clock, registry);
    store.set_transform_log(transform_log);

    std::uint64_t e1 = store.append_episode("feed", LogicalTime{100}, "alpha");
    clock.advance_to(LogicalTime{150});
    std::uint64_t e2 = store.append_episode("feed", LogicalTime{150}, "beta");

    TransformationRunner runner(store, registry);
    runner.run("upper", 1, {e1, e2});

    Transaction tx = kernel.begin_tx();
    store.update_state(tx, "inv:SKU1", {{}, Bytes("2")}, "setup");
    kernel.commit_tx(tx);

    clock.advance_to(LogicalTime{200});
    Transaction tx2 = kernel.begin_tx();
    store.update_state(tx2, "inv:SKU1",
                       {[](const std::optional<Bytes>& v) { return v == Bytes("2"); }, Bytes("1")},
                       "agent:inventory");
    store.update_state(tx2, "order:O1", {{}, Bytes("escalated")}, "agent:shipping");
    kernel.commit_tx(tx2);

    runner.run("upper", 2, {e2});

    Transaction tx3 = kernel.begin_tx();
    store.update_state(tx3, "order:O1", {{}, std::nullopt}, "agent:cleanup");  // delete
    kernel.commit_tx(tx3);

    // Rebuild into a fresh kernel and compare final layer contents.
    SimulatedClock clock2;
    Kernel rebuilt_kernel(clock2);
    MemoryStore rebuilt(rebuilt_kernel, clock2, registry);
    RebuildStats stats = rebuilt.rebuild_from_logs(episodic_log, transform_log);
    CHECK(stats.transformations == 2);

    CutId original_cut = kernel.begin_snapshot();
    CutId rebuilt_cut = rebuilt_kernel.begin_snapshot();
    CHECK(rebuilt_kernel.layer_contents(rebuilt_cut, Layer::kEpisodic) ==
          kernel.layer_contents(original_cut, Layer::kEpisodic));
    CHECK(rebuilt_kernel.layer_contents(rebuilt_cut, Layer::kSemantic) ==
          kernel.layer_contents(original_cut, Layer::kSemantic));
    CHECK(rebuilt_kernel.layer_contents(rebuilt_cut, Layer::kState) ==
          kernel.layer_contents(original_cut, Layer::kState));

    // Appends continue from the replayed sequence.
    CHECK(rebuilt.append_episode("feed", LogicalTime{300}, "gamma") == store.max_seq() + 1);

    fs::remove(episodic_log);
    fs::remove(transform_log);
}

TEST_CASE("external actions are recorded as episodes") {
    Fixture f;
    Transaction tx = f.kernel.begin_tx();
    std::uint64_t seq =
        f.store.append_external_action(tx, "d-7", "agent:shipping", "escalate-split-shipment",
                                       LogicalTime{400});
    f.kernel.commit_tx(tx);

    std::optional<Episode> episode = f.store.episode(f.kernel.begin_snapshot(), seq);
    REQUIRE(episode);
    nlohmann::json payload = nlohmann::json::parse(episode->payload);
    CHECK(payload["kind"] == "external_action");
    CHECK(payload["decision_id"] == "d-7");
    CHECK(payload["action"] == "escalate-split-shipment");
}
