#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include "ctxlake/memory.hpp"
#include "ctxlake/semantic.hpp"

using namespace ctxlake;

namespace {

// Brute-force search oracle: embed everything, score everything, stable-sort
// the lot. No heaps, no partial selection.
std::vector<SearchHit> brute_force_search(const std::vector<std::pair<std::string, std::string>>& corpus,
                                          const EmbeddingVector& query, std::size_t k) {
    std::vector<SearchHit> hits;
    for (const auto& [key, text] : corpus) {
        double dot = 0.0;
        EmbeddingVector e = embed(text);
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) dot += query.components[i] * e.components[i];
        double nq = query.norm();
        double ne = e.norm();
        hits.push_back({key, (nq == 0.0 || ne == 0.0) ? 0.0 : dot / (nq * ne)});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.key < b.key;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

std::string random_text(std::mt19937_64& rng) {
    static const std::vector<std::string> vocabulary = {
        "checkout", "fraud", "pattern", "inventory", "restock", "browse", "arrival",
        "direct",   "order", "account", "takeover",  "session", "click",  "purchase",
        "normal",   "risk",  "signal",  "baseline",  "burst",   "device"};
    std::size_t words = 2 + rng() % 6;
    std::string text;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) text += ' ';
        text += vocabulary[rng() % vocabulary.size()];
    }
    return text;
}

struct CorpusFixture {
    SimulatedClock clock;
    TransformationRegistry registry;
    Kernel kernel{clock};
    MemoryStore store{kernel, clock, registry};

    // Commits `texts` as governed semantic records keyed sem:NNNN.
    CutId load(const std::vector<std::string>& texts) {
        std::vector<SemanticRecord> records;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            std::string digits = std::to_string(i);
            records.push_back({"sem:" + std::string(4 - digits.size(), '0') + digits, texts[i],
                               "catalog", 1, {1}, CutId{}});
        }
        if (!registry.is_registered("catalog", 1)) {
            registry.register_transformation(
                {"catalog", 1, [records](const std::vector<Episode>&) { return records; }});
        }
        store.append_episode("feed", LogicalTime{1}, "corpus source");
        TransformationRunner runner(store, registry);
        return runner.run("catalog", 1, {1});
    }
};

}  // namespace

TEST_CASE("embedding is deterministic and zero only for empty token streams") {
    CHECK(embed("").is_zero());
    CHECK(embed(" .,;!").is_zero());
    CHECK_FALSE(embed("checkout").is_zero());

    for (const char* text : {"checkout fraud pattern", "a b c", "Mixed CASE text 42"}) {
        EmbeddingVector a = embed(text);
        EmbeddingVector b = embed(text);
        CHECK(a.components == b.components);
        CHECK(a.norm() == doctest::Approx(1.0));
    }

    // Tokenization is case- and punctuation-insensitive.
    CHECK(embed("Checkout, Fraud. PATTERN!").components ==
          embed("checkout fraud pattern").components);
}

TEST_CASE("cosine separates related from unrelated text") {
    // Values computed with this embedder ahead of the build and frozen.
    double related = cosine(embed("checkout fraud pattern"), embed("fraud pattern at checkout"));
    double unrelated = cosine(embed("checkout fraud pattern"), embed("inventory restock"));
    CHECK(related == doctest::Approx(0.866025).epsilon(1e-6));
    CHECK(unrelated == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(related > unrelated);

    CHECK(cosine(embed(""), embed("anything")) == 0.0);
}

TEST_CASE("similarity_search matches the brute-force oracle") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 4; ++round) {
        CorpusFixture f;
        std::vector<std::string> texts;
        std::size_t n = 50 + rng() % 250;
        for (std::size_t i = 0; i < n; ++i) texts.push_back(random_text(rng));
        CutId cut = f.load(texts);

        std::vector<std::pair<std::string, std::string>> corpus;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            std::string digits = std::to_string(i);
            corpus.emplace_back("sem:" + std::string(4 - digits.size(), '0') + digits, texts[i]);
        }

        for (int q = 0; q < 20; ++q) {
            EmbeddingVector query = embed(random_text(rng));
            std::size_t k = 1 + rng() % (n + 10);
            auto got = similarity_search(f.kernel, cut, query, k);
            auto want = brute_force_search(corpus, query, k);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CAPTURE(i);
                CHECK(got[i].key == want[i].key);
                CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("search edge cases: empty layer, oversized k, lexicographic ties") {
    CorpusFixture f;
    CHECK(similarity_search(f.kernel, CutId{0}, embed("anything"), 5).empty());
    CHECK_THROWS_AS(similarity_search(f.kernel, CutId{3}, embed("x"), 1), Error);

    CutId cut = f.load({"same text", "same text", "same text"});
    auto all = similarity_search(f.kernel, cut, embed("same text"), 10);
    REQUIRE(all.size() == 3);  // k larger than corpus returns the whole corpus
    CHECK(all[0].key == "sem:0000");
    CHECK(all[1].key == "sem:0001");
    CHECK(all[2].key == "sem:0002");
    CHECK(all[0].score == all[2].score);

    // Every governed result resolves to a provenance-bearing record.
    for (const SearchHit& hit : all) {
        std::optional<SemanticRecord> record = f.store.read_semantic(cut, hit.key);
        REQUIRE(record);
        CHECK_FALSE(record->transform_id.empty());
        CHECK_FALSE(record->sources.empty());
    }
}

TEST_CASE("search at a cut never sees later commits, even mid-write") {
    CorpusFixture f;
    CutId cut = f.load({"alpha pattern", "beta pattern"});
    auto baseline = similarity_search(f.kernel, cut, embed("pattern"), 100);
    REQUIRE(baseline.size() == 2);

    constexpr int kConcurrentWrites = 200;
    std::thread writer([&f] {
        for (int i = 0; i < kConcurrentWrites; ++i) {
            Transaction tx = f.kernel.begin_tx();
            SemanticRecord record{"sem:late:" + std::to_string(i), "pattern noise " +
                                      std::to_string(i),
                                  "catalog", 1, {1}, CutId{}};
            f.store.write_semantic(tx, record);
            f.kernel.commit_tx(tx);
        }
    });

    for (int i = 0; i < 300; ++i) {
        auto hits = similarity_search(f.kernel, cut, embed("pattern"), 100);
        REQUIRE(hits.size() == 2);
        CHECK(hits[0].key == baseline[0].key);
        CHECK(hits[1].key == baseline[1].key);
    }
    writer.join();

    CHECK(similarity_search(f.kernel, f.kernel.begin_snapshot(), embed("pattern"), 1000).size() ==
          2 + kConcurrentWrites);
}

TEST_CASE("classify picks the nearest registered prototype") {
    PrototypeSet prototypes;
    prototypes.set_prototype("direct-arrival-no-browse",
                             "direct arrival on checkout url purchase without browsing");
    prototypes.set_prototype("normal-browse",
                             "organic navigation browsing product pages before purchase");

    std::vector<std::string> single = {"direct-arrival-no-browse"};
    CHECK(classify(prototypes, "anything at all", single) == "direct-arrival-no-browse");

    std::vector<std::string> labels = {"direct-arrival-no-browse", "normal-browse"};
    CHECK(classify(prototypes, "organic navigation browsing product pages before purchase",
                   labels) == "normal-browse");

    // Checkout clickstream summary; scores 0.816497 vs 0.218218 with this
    // embedder (frozen ahead of the build).
    CHECK(classify(prototypes,
                   "direct arrival on checkout url purchase without browsing account takeover "
                   "precursor pattern",
                   labels) == "direct-arrival-no-browse");

    std::vector<std::string> none;
    CHECK_THROWS_AS(classify(prototypes, "x", none), Error);
    std::vector<std::string> unknown = {"no-such-label"};
    CHECK_THROWS_AS(classify(prototypes, "x", unknown), Error);

    // Ties break by label order.
    PrototypeSet tied;
    tied.set_prototype("first", "identical words");
    tied.set_prototype("second", "identical words");
    std::vector<std::string> tie_labels = {"second", "first"};
    CHECK(classify(tied, "identical words", tie_labels) == "second");
}

TEST_CASE("transformation runner validates inputs and logs outputs") {
    CorpusFixture f;
    TransformationRunner runner(f.store, f.registry);
    CHECK_THROWS_AS(runner.run("nope", 1, {}), Error);

    f.registry.register_transformation(
        {"echo", 1, [](const std::vector<Episode>& episodes) {
             std::vector<SemanticRecord> records;
             for (const Episode& e : episodes) {
                 records.push_back({"sem:echo", e.payload, "echo", 1, {e.seq}, CutId{}});
             }
             return records;
         }});
    CHECK_THROWS_AS(runner.run("echo", 1, {99}), Error);

    std::uint64_t seq = f.store.append_episode("feed", LogicalTime{1}, "observed text");
    CutId cut = runner.run("echo", 1, {seq});
    std::optional<SemanticRecord> record = f.store.read_semantic(cut, "sem:echo");
    REQUIRE(record);
    CHECK(record->interpretation == "observed text");
}
