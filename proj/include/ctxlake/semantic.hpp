#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxlake/kernel.hpp"
#include "ctxlake/memory.hpp"

namespace ctxlake {

inline constexpr std::size_t kEmbeddingDim = 64;

/// Fixed-dimension embedding. Deterministic function of the input text;
/// L2-normalized unless all-zero.
struct EmbeddingVector {
    std::array<double, kEmbeddingDim> components{};

    double norm() const;
    bool is_zero() const;
};

/// Deterministic token-hash bag-of-words embedder: lowercase alphanumeric
/// tokens, FNV-1a hashed into signed buckets. A stand-in for model-backed
/// interpretation with a declared (zero) latency bound; any embedder with
/// the same signature can replace it.
EmbeddingVector embed(std::string_view text);

/// Cosine similarity; zero if either vector is all-zero.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Versioned pure function from episodes to semantic records. The version
/// must change whenever behavior changes; for a fixed (version, inputs) the
/// output is deterministic.
struct Transformation {
    std::string id;
    std::uint32_t version = 0;
    std::function<std::vector<SemanticRecord>(const std::vector<Episode>&)> fn;
};

/// The semantic write authority: only registered (id, version) pairs may
/// produce semantic records.
class TransformationRegistry {
public:
    /// Throws DuplicateVersion if (id, version) is already registered.
    /// Registering a new version leaves records produced by older versions
    /// readable with their original provenance.
    void register_transformation(Transformation t);

    bool is_registered(std::string_view id, std::uint32_t version) const;
    const Transformation* find(std::string_view id, std::uint32_t version) const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::pair<std::string, std::uint32_t>, Transformation> transformations_;
};

struct SearchHit {
    std::string key;
    double score = 0.0;
};

/// Exact top-k cosine search over every semantic record visible at `cut`,
/// executed entirely within that cut. Ties break by ascending key. Records
/// whose values do not decode as semantic records are embedded from their
/// raw bytes, so ungoverned writes are still findable (and flagged by the
/// admissibility gate when cited).
std::vector<SearchHit> similarity_search(const Kernel& kernel, CutId cut,
                                         const EmbeddingVector& query, std::size_t k);

/// Label prototypes for nearest-prototype classification, loaded from
/// scenario config JSON.
class PrototypeSet {
public:
    void set_prototype(std::string label, std::string text);
    bool has(std::string_view label) const;
    const std::string& prototype(std::string_view label) const;

private:
    std::map<std::string, std::string, std::less<>> prototypes_;
};

/// Nearest prototype by embedding cosine; ties break by label order. Throws
/// EmptyLabelSet when no labels are given and InvalidConfig when a label has
/// no prototype.
std::string classify(const PrototypeSet& prototypes, std::string_view text,
                     std::span<const std::string> labels);

/// Executes registered transformations over episodes as ordinary
/// transactions and appends to the transformation log.
class TransformationRunner {
public:
    TransformationRunner(MemoryStore& store, const TransformationRegistry& registry)
        : store_(store), registry_(registry) {}

    /// Runs (id, version) over the given episode seqs, commits the resulting
    /// records, and logs the run. Returns the commit cut.
    CutId run(std::string_view id, std::uint32_t version,
              const std::vector<std::uint64_t>& input_seqs);

private:
    MemoryStore& store_;
    const TransformationRegistry& registry_;
};

}  // namespace ctxlake
