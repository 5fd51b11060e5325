#include "ctxlake/memory.hpp"

#include <json.hpp>

#include "ctxlake/base64.hpp"
#include "ctxlake/semantic.hpp"

namespace ctxlake {

namespace {

using nlohmann::json;

constexpr std::string_view kEpisodicPrefix = "ep:";
constexpr int kSeqDigits = 20;

Bytes encode_episode_value(std::string_view source, LogicalTime observed_at,
                           const Bytes& payload) {
    json value = {{"observed_at_ms", observed_at.millis},
                  {"payload_b64", base64_encode(payload)},
                  {"source", std::string(source)}};
    return value.dump();
}

Bytes encode_semantic_value(const SemanticRecord& record) {
    json sources = json::array();
    for (std::uint64_t seq : record.sources) sources.push_back(seq);
    json value = {{"interpretation_b64", base64_encode(record.interpretation)},
                  {"sources", std::move(sources)},
                  {"transform_id", record.transform_id},
                  {"transform_version", record.transform_version}};
    return value.dump();
}

}  // namespace

MemoryStore::MemoryStore(Kernel& kernel, const Clock& clock,
                         const TransformationRegistry& registry, MemoryOptions options)
    : kernel_(kernel), clock_(clock), registry_(registry), options_(options) {
    install_validators();
}

std::string MemoryStore::episodic_key(std::uint64_t seq) {
    std::string digits = std::to_string(seq);
    std::string key(kEpisodicPrefix);
    key.append(kSeqDigits - digits.size(), '0');
    key += digits;
    return key;
}

std::optional<Episode> MemoryStore::decode_episode(std::string_view key, const Bytes& value) {
    if (key.substr(0, kEpisodicPrefix.size()) != kEpisodicPrefix) return std::nullopt;
    json obj = json::parse(value, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) return std::nullopt;
    if (!obj.contains("payload_b64") || !obj.contains("source") ||
        !obj.contains("observed_at_ms")) {
        return std::nullopt;
    }
    Episode episode;
    episode.seq = std::stoull(std::string(key.substr(kEpisodicPrefix.size())));
    episode.observed_at = LogicalTime{obj["observed_at_ms"].get<std::uint64_t>()};
    episode.source = obj["source"].get<std::string>();
    episode.payload = base64_decode(obj["payload_b64"].get<std::string>());
    return episode;
}

std::uint64_t MemoryStore::buffer_episode(Transaction& tx, std::string_view source,
                                          LogicalTime observed_at, const Bytes& payload) {
    std::uint64_t seq = next_seq_.fetch_add(1, std::memory_order_relaxed);
    kernel_.tx_write_episodic(tx, episodic_key(seq), encode_episode_value(source, observed_at, payload),
                              seq, observed_at.millis);
    return seq;
}

std::uint64_t MemoryStore::append_episode(std::string_view source, LogicalTime observed_at,
                                          Bytes payload) {
    Transaction tx = kernel_.begin_tx();
    std::uint64_t seq = buffer_episode(tx, source, observed_at, payload);
    kernel_.commit_tx(tx);
    return seq;
}

std::uint64_t MemoryStore::append_episode_in(Transaction& tx, std::string_view source,
                                             LogicalTime observed_at, Bytes payload) {
    return buffer_episode(tx, source, observed_at, payload);
}

std::uint64_t MemoryStore::append_external_action(Transaction& tx, std::string_view decision_id,
                                                  std::string_view agent_id,
                                                  std::string_view action, LogicalTime at) {
    json payload = {{"action", std::string(action)},
                    {"agent", std::string(agent_id)},
                    {"decision_id", std::string(decision_id)},
                    {"kind", "external_action"}};
    return buffer_episode(tx, agent_id, at, payload.dump());
}

std::optional<Episode> MemoryStore::episode(CutId cut, std::uint64_t seq) const {
    std::optional<Bytes> value = kernel_.read(cut, Layer::kEpisodic, episodic_key(seq));
    if (!value) return std::nullopt;
    return decode_episode(episodic_key(seq), *value);
}

std::optional<SemanticRecord> MemoryStore::decode_semantic(std::string_view key,
                                                           const Bytes& value) {
    json obj = json::parse(value, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) return std::nullopt;
    if (!obj.contains("interpretation_b64") || !obj.contains("transform_id") ||
        !obj.contains("transform_version") || !obj.contains("sources")) {
        return std::nullopt;
    }
    SemanticRecord record;
    record.key = std::string(key);
    record.interpretation = base64_decode(obj["interpretation_b64"].get<std::string>());
    record.transform_id = obj["transform_id"].get<std::string>();
    record.transform_version = obj["transform_version"].get<std::uint32_t>();
    for (const auto& seq : obj["sources"]) record.sources.push_back(seq.get<std::uint64_t>());
    return record;
}

void MemoryStore::write_semantic(Transaction& tx, const SemanticRecord& record) {
    if (record.transform_id.empty() || record.sources.empty()) {
        throw Error(ErrorCode::kUnregisteredTransform,
                    "semantic record '" + record.key + "' lacks provenance");
    }
    if (!registry_.is_registered(record.transform_id, record.transform_version)) {
        throw Error(ErrorCode::kUnregisteredTransform,
                    "transformation (" + record.transform_id + ", v" +
                        std::to_string(record.transform_version) + ") is not registered");
    }
    for (std::uint64_t seq : record.sources) {
        if (!kernel_.tx_read(tx, Layer::kEpisodic, episodic_key(seq))) {
            throw Error(ErrorCode::kUnknownSourceEpisode,
                        "source episode " + std::to_string(seq) + " does not resolve");
        }
    }
    kernel_.tx_write(tx, Layer::kSemantic, record.key, encode_semantic_value(record));
}

std::optional<SemanticRecord> MemoryStore::read_semantic(CutId cut, std::string_view key) const {
    std::optional<Bytes> value = kernel_.read(cut, Layer::kSemantic, key);
    if (!value) return std::nullopt;
    std::optional<SemanticRecord> record = decode_semantic(key, *value);
    if (record) {
        record->produced_at_cut = kernel_.version_start(cut, Layer::kSemantic, key).value_or(CutId{0});
    }
    return record;
}

void MemoryStore::update_state(Transaction& tx, std::string_view key,
                               const StateTransition& transition, std::string_view actor) {
    std::optional<Bytes> current = kernel_.tx_read(tx, Layer::kState, key);
    if (transition.precondition && !transition.precondition(current)) {
        throw Error(ErrorCode::kTransitionRejected,
                    "precondition failed for state key '" + std::string(key) + "'");
    }
    if (transition.next) {
        kernel_.tx_write(tx, Layer::kState, key, *transition.next);
    } else {
        kernel_.tx_remove(tx, Layer::kState, key);
    }

    json payload = {{"actor", std::string(actor)}, {"key", std::string(key)},
                    {"kind", "state_transition"}};
    if (transition.next) {
        payload["value_b64"] = base64_encode(*transition.next);
    } else {
        payload["deleted"] = true;
    }
    buffer_episode(tx, actor, clock_.now(), payload.dump());
}

void MemoryStore::register_state_validator(std::string key_prefix, StateValidator validator) {
    std::lock_guard lock(mutex_);
    state_validators_.emplace_back(std::move(key_prefix), std::move(validator));
}

void MemoryStore::install_validators() {
    kernel_.set_commit_validator(
        Layer::kState,
        [this](std::string_view key, const std::optional<Bytes>& old_value,
               const std::optional<Bytes>& new_value) -> std::optional<std::string> {
            std::lock_guard lock(mutex_);
            for (const auto& [prefix, validator] : state_validators_) {
                if (key.substr(0, prefix.size()) != prefix) continue;
                if (auto reason = validator(key, old_value, new_value)) return reason;
            }
            return std::nullopt;
        });

    if (options_.enforce_semantic_authority) {
        kernel_.set_commit_validator(
            Layer::kSemantic,
            [this](std::string_view key, const std::optional<Bytes>&,
                   const std::optional<Bytes>& new_value) -> std::optional<std::string> {
                if (!new_value) return std::nullopt;  // tombstone
                std::optional<SemanticRecord> record = decode_semantic(key, *new_value);
                if (!record || record->transform_id.empty() || record->sources.empty() ||
                    !registry_.is_registered(record->transform_id, record->transform_version)) {
                    throw Error(ErrorCode::kUnregisteredTransform,
                                "semantic write to '" + std::string(key) +
                                    "' bypasses the transformation registry");
                }
                return std::nullopt;
            });
    }
}

void MemoryStore::set_transform_log(const std::filesystem::path& path) {
    auto stream = std::make_unique<std::ofstream>(path, std::ios::app | std::ios::binary);
    if (!*stream) {
        throw Error(ErrorCode::kInvalidConfig, "cannot open transform log " + path.string());
    }
    std::lock_guard lock(mutex_);
    transform_log_ = std::move(stream);
}

void MemoryStore::log_transformation(const TransformLogEntry& entry) {
    std::lock_guard lock(mutex_);
    if (!transform_log_) return;
    json sources = json::array();
    for (std::uint64_t seq : entry.input_seqs) sources.push_back(seq);
    json keys = json::array();
    for (const std::string& key : entry.output_keys) keys.push_back(key);
    json line = {{"committed_cut", entry.committed_cut.value},
                 {"input_seqs", std::move(sources)},
                 {"output_keys", std::move(keys)},
                 {"transform_id", entry.transform_id},
                 {"version", entry.version}};
    *transform_log_ << line.dump() << '\n';
    transform_log_->flush();
}

std::vector<TransformLogEntry> MemoryStore::read_transform_log(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kParseError, "cannot open transform log " + path.string());
    }
    std::vector<TransformLogEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json obj = json::parse(line);
            TransformLogEntry entry;
            entry.transform_id = obj.at("transform_id").get<std::string>();
            entry.version = obj.at("version").get<std::uint32_t>();
            for (const auto& seq : obj.at("input_seqs")) {
                entry.input_seqs.push_back(seq.get<std::uint64_t>());
            }
            for (const auto& key : obj.at("output_keys")) {
                entry.output_keys.push_back(key.get<std::string>());
            }
            entry.committed_cut = CutId{obj.at("committed_cut").get<std::uint64_t>()};
            entries.push_back(std::move(entry));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParseError,
                        "transform log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

RebuildStats MemoryStore::rebuild_from_logs(const std::filesystem::path& episodic_log,
                                            const std::filesystem::path& transform_log) {
    RebuildStats stats;

    std::ifstream in(episodic_log, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kParseError, "cannot open episodic log " + episodic_log.string());
    }
    std::string line;
    std::size_t line_no = 0;
    std::uint64_t max_seq_seen = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::uint64_t seq = 0;
        std::uint64_t time_ms = 0;
        std::string key;
        Bytes value;
        try {
            json obj = json::parse(line);
            seq = obj.at("seq").get<std::uint64_t>();
            time_ms = obj.at("time_ms").get<std::uint64_t>();
            key = obj.at("key").get<std::string>();
            value = base64_decode(obj.at("value_b64").get<std::string>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParseError,
                        "episodic log line " + std::to_string(line_no) + ": " + e.what());
        }

        Transaction tx = kernel_.begin_tx();
        kernel_.tx_write_episodic(tx, key, value, seq, time_ms);

        // Recorded state transitions replay their write in the same commit,
        // mirroring the original atomicity. No precondition re-check: the
        // log records what was applied.
        if (std::optional<Episode> episode = decode_episode(key, value)) {
            json payload = json::parse(episode->payload, nullptr, false);
            if (payload.is_object() && payload.value("kind", "") == "state_transition") {
                std::string state_key = payload.at("key").get<std::string>();
                if (payload.value("deleted", false)) {
                    kernel_.tx_remove(tx, Layer::kState, state_key);
                } else {
                    kernel_.tx_write(tx, Layer::kState, state_key,
                                     base64_decode(payload.at("value_b64").get<std::string>()));
                }
            }
        }
        kernel_.commit_tx(tx);
        max_seq_seen = std::max(max_seq_seen, seq);
        ++stats.episodes;
    }
    next_seq_.store(max_seq_seen + 1);

    for (const TransformLogEntry& entry : read_transform_log(transform_log)) {
        const Transformation* transformation =
            registry_.find(entry.transform_id, entry.version);
        if (!transformation) {
            throw Error(ErrorCode::kUnregisteredTransform,
                        "transform log references unregistered (" + entry.transform_id + ", v" +
                            std::to_string(entry.version) + ")");
        }
        Transaction tx = kernel_.begin_tx();
        std::vector<Episode> inputs;
        for (std::uint64_t seq : entry.input_seqs) {
            std::optional<Episode> input = episode(tx.snapshot(), seq);
            if (!input) {
                throw Error(ErrorCode::kUnknownSourceEpisode,
                            "transform log input episode " + std::to_string(seq) + " missing");
            }
            inputs.push_back(std::move(*input));
        }
        for (const SemanticRecord& record : transformation->fn(inputs)) {
            write_semantic(tx, record);
        }
        kernel_.commit_tx(tx);
        ++stats.transformations;
    }
    return stats;
}

}  // namespace ctxlake
