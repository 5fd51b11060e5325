#include "ctxlake/semantic.hpp"

#include <algorithm>
#include <cmath>

namespace ctxlake {

namespace {

std::uint64_t fnv1a(std::string_view token) {
    std::uint64_t hash = 1469598103934665603ull;
    for (char c : token) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ull;
    }
    return hash;
}

bool better_hit(const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
}

}  // namespace

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (double c : components) sum += c * c;
    return std::sqrt(sum);
}

bool EmbeddingVector::is_zero() const {
    for (double c : components) {
        if (c != 0.0) return false;
    }
    return true;
}

EmbeddingVector embed(std::string_view text) {
    EmbeddingVector vec;
    std::string token;
    auto flush = [&vec, &token] {
        if (token.empty()) return;
        std::uint64_t hash = fnv1a(token);
        std::size_t bucket = hash % kEmbeddingDim;
        double sign = ((hash >> 6) & 1u) ? 1.0 : -1.0;
        vec.components[bucket] += sign;
        token.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();

    double n = vec.norm();
    if (n > 0.0) {
        for (double& c : vec.components) c /= n;
    }
    return vec;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) dot += a.components[i] * b.components[i];
    double na = a.norm();
    double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (na * nb);
}

void TransformationRegistry::register_transformation(Transformation t) {
    std::unique_lock lock(mutex_);
    auto key = std::make_pair(t.id, t.version);
    if (transformations_.count(key)) {
        throw Error(ErrorCode::kDuplicateVersion,
                    "(" + t.id + ", v" + std::to_string(t.version) + ") already registered");
    }
    transformations_.emplace(std::move(key), std::move(t));
}

bool TransformationRegistry::is_registered(std::string_view id, std::uint32_t version) const {
    std::shared_lock lock(mutex_);
    return transformations_.count({std::string(id), version}) > 0;
}

const Transformation* TransformationRegistry::find(std::string_view id,
                                                   std::uint32_t version) const {
    std::shared_lock lock(mutex_);
    auto it = transformations_.find({std::string(id), version});
    return it == transformations_.end() ? nullptr : &it->second;
}

std::vector<SearchHit> similarity_search(const Kernel& kernel, CutId cut,
                                         const EmbeddingVector& query, std::size_t k) {
    std::vector<SearchHit> hits;
    for (const auto& [key, value] : kernel.scan(cut, Layer::kSemantic)) {
        std::optional<SemanticRecord> record = MemoryStore::decode_semantic(key, value);
        const Bytes& text = record ? record->interpretation : value;
        hits.push_back({key, cosine(query, embed(text))});
    }
    if (k == 0) return {};
    if (hits.size() > k) {
        std::nth_element(hits.begin(), hits.begin() + k, hits.end(), better_hit);
        hits.resize(k);
    }
    std::sort(hits.begin(), hits.end(), better_hit);
    return hits;
}

void PrototypeSet::set_prototype(std::string label, std::string text) {
    prototypes_[std::move(label)] = std::move(text);
}

bool PrototypeSet::has(std::string_view label) const {
    return prototypes_.find(label) != prototypes_.end();
}

const std::string& PrototypeSet::prototype(std::string_view label) const {
    auto it = prototypes_.find(label);
    if (it == prototypes_.end()) {
        throw Error(ErrorCode::kInvalidConfig,
                    "label '" + std::string(label) + "' has no prototype");
    }
    return it->second;
}

std::string classify(const PrototypeSet& prototypes, std::string_view text,
                     std::span<const std::string> labels) {
    if (labels.empty()) {
        throw Error(ErrorCode::kEmptyLabelSet, "classify requires at least one label");
    }
    EmbeddingVector query = embed(text);
    std::string best_label;
    double best_score = 0.0;
    bool first = true;
    for (const std::string& label : labels) {
        double score = cosine(query, embed(prototypes.prototype(label)));
        if (first || score > best_score) {
            best_label = label;
            best_score = score;
            first = false;
        }
    }
    return best_label;
}

CutId TransformationRunner::run(std::string_view id, std::uint32_t version,
                                const std::vector<std::uint64_t>& input_seqs) {
    const Transformation* transformation = registry_.find(id, version);
    if (!transformation) {
        throw Error(ErrorCode::kUnregisteredTransform,
                    "transformation (" + std::string(id) + ", v" + std::to_string(version) +
                        ") is not registered");
    }

    Transaction tx = store_.kernel().begin_tx();
    std::vector<Episode> inputs;
    for (std::uint64_t seq : input_seqs) {
        std::optional<Episode> episode = store_.episode(tx.snapshot(), seq);
        if (!episode) {
            throw Error(ErrorCode::kUnknownSourceEpisode,
                        "input episode " + std::to_string(seq) + " does not resolve");
        }
        inputs.push_back(std::move(*episode));
    }

    std::vector<SemanticRecord> records = transformation->fn(inputs);
    std::vector<std::string> output_keys;
    output_keys.reserve(records.size());
    for (const SemanticRecord& record : records) {
        store_.write_semantic(tx, record);
        output_keys.push_back(record.key);
    }
    CutId cut = store_.kernel().commit_tx(tx);
    store_.log_transformation({std::string(id), version, input_seqs, output_keys, cut});
    return cut;
}

}  // namespace ctxlake
