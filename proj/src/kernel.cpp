#include "ctxlake/kernel.hpp"

#include <algorithm>

#include <json.hpp>

#include "ctxlake/base64.hpp"

namespace ctxlake {

namespace {

using nlohmann::json;

// Smallest key strictly greater than every key sharing `prefix`, or "" if the
// range is unbounded above.
std::string prefix_end(std::string_view prefix) {
    std::string end(prefix);
    while (!end.empty()) {
        auto& back = reinterpret_cast<unsigned char&>(end.back());
        if (back != 0xff) {
            ++back;
            return end;
        }
        end.pop_back();
    }
    return end;
}

}  // namespace

Kernel::Kernel(const Clock& clock) : clock_(clock) {}

Kernel::~Kernel() = default;

CutId Kernel::begin_snapshot() const {
    return CutId{latest_cut_.load(std::memory_order_acquire)};
}

std::optional<Bytes> Kernel::read_locked(CutId cut, Layer layer, std::string_view key) const {
    const LayerMap& map = layer_map(layer);
    auto it = map.find(std::string(key));
    if (it == map.end()) return std::nullopt;
    const Chain& chain = it->second;
    for (auto v = chain.rbegin(); v != chain.rend(); ++v) {
        if (v->from <= cut.value) {
            if (v->to && cut.value >= *v->to) return std::nullopt;
            return v->value;
        }
    }
    return std::nullopt;
}

std::optional<Bytes> Kernel::read(CutId cut, Layer layer, std::string_view key) const {
    if (cut.value > latest_cut_.load(std::memory_order_acquire)) {
        throw Error(ErrorCode::kUnknownCut,
                    "cut " + std::to_string(cut.value) + " is ahead of the latest commit");
    }
    std::shared_lock lock(store_mutex_);
    return read_locked(cut, layer, key);
}

std::vector<std::pair<std::string, Bytes>> Kernel::scan(CutId cut, Layer layer,
                                                        std::string_view begin,
                                                        std::string_view end,
                                                        const ScanPredicate& predicate) const {
    if (cut.value > latest_cut_.load(std::memory_order_acquire)) {
        throw Error(ErrorCode::kUnknownCut,
                    "cut " + std::to_string(cut.value) + " is ahead of the latest commit");
    }
    std::vector<std::pair<std::string, Bytes>> out;
    std::shared_lock lock(store_mutex_);
    const LayerMap& map = layer_map(layer);
    for (auto it = map.lower_bound(std::string(begin)); it != map.end(); ++it) {
        if (!end.empty() && it->first >= end) break;
        std::optional<Bytes> value = read_locked(cut, layer, it->first);
        if (!value) continue;
        if (predicate && !predicate(it->first, *value)) continue;
        out.emplace_back(it->first, std::move(*value));
    }
    return out;
}

std::vector<std::pair<std::string, Bytes>> Kernel::scan_prefix(
    CutId cut, Layer layer, std::string_view prefix, const ScanPredicate& predicate) const {
    return scan(cut, layer, prefix, prefix_end(prefix), predicate);
}

std::map<std::string, Bytes> Kernel::layer_contents(CutId cut, Layer layer) const {
    std::map<std::string, Bytes> out;
    for (auto& [key, value] : scan(cut, layer)) {
        out.emplace(std::move(key), std::move(value));
    }
    return out;
}

std::optional<CutId> Kernel::version_start(CutId cut, Layer layer, std::string_view key) const {
    if (cut.value > latest_cut_.load(std::memory_order_acquire)) {
        throw Error(ErrorCode::kUnknownCut,
                    "cut " + std::to_string(cut.value) + " is ahead of the latest commit");
    }
    std::shared_lock lock(store_mutex_);
    const LayerMap& map = layer_map(layer);
    auto it = map.find(std::string(key));
    if (it == map.end()) return std::nullopt;
    for (auto v = it->second.rbegin(); v != it->second.rend(); ++v) {
        if (v->from <= cut.value) {
            if ((v->to && cut.value >= *v->to) || !v->value) return std::nullopt;
            return CutId{v->from};
        }
    }
    return std::nullopt;
}

Transaction Kernel::begin_tx() const {
    return Transaction(next_tx_id_.fetch_add(1, std::memory_order_relaxed), begin_snapshot());
}

std::optional<Bytes> Kernel::tx_read(Transaction& tx, Layer layer, std::string_view key) const {
    if (tx.status_ != Transaction::Status::kOpen) {
        throw Error(ErrorCode::kTxClosed, "tx_read on a non-open transaction");
    }
    tx.read_set_.emplace(layer, std::string(key));
    // Read-your-writes: the latest buffered write wins.
    for (auto w = tx.writes_.rbegin(); w != tx.writes_.rend(); ++w) {
        if (w->layer == layer && w->key == key) return w->value;
    }
    std::shared_lock lock(store_mutex_);
    return read_locked(tx.snapshot_, layer, key);
}

void Kernel::tx_write(Transaction& tx, Layer layer, std::string_view key, Bytes value) {
    if (tx.status_ != Transaction::Status::kOpen) {
        throw Error(ErrorCode::kTxClosed, "tx_write on a non-open transaction");
    }
    if (layer == Layer::kEpisodic) {
        tx_write_episodic(tx, key, std::move(value), 0, 0);
        return;
    }
    tx.writes_.push_back({layer, std::string(key), std::move(value), std::nullopt});
}

void Kernel::tx_write_episodic(Transaction& tx, std::string_view key, Bytes value,
                               std::uint64_t seq, std::uint64_t time_ms) {
    if (tx.status_ != Transaction::Status::kOpen) {
        throw Error(ErrorCode::kTxClosed, "tx_write on a non-open transaction");
    }
    for (const PendingWrite& w : tx.writes_) {
        if (w.layer == Layer::kEpisodic && w.key == key) {
            throw Error(ErrorCode::kEpisodicRevision,
                        "episodic key '" + std::string(key) + "' already written in this tx");
        }
    }
    {
        std::shared_lock lock(store_mutex_);
        if (episodic_key_exists_locked(key)) {
            throw Error(ErrorCode::kEpisodicRevision,
                        "episodic key '" + std::string(key) + "' already exists");
        }
    }
    tx.writes_.push_back(
        {Layer::kEpisodic, std::string(key), std::move(value), EpisodicMeta{seq, time_ms}});
}

void Kernel::tx_remove(Transaction& tx, Layer layer, std::string_view key) {
    if (tx.status_ != Transaction::Status::kOpen) {
        throw Error(ErrorCode::kTxClosed, "tx_remove on a non-open transaction");
    }
    if (layer == Layer::kEpisodic) {
        throw Error(ErrorCode::kEpisodicRevision, "the episodic layer has no deletion");
    }
    tx.writes_.push_back({layer, std::string(key), std::nullopt, std::nullopt});
}

bool Kernel::episodic_key_exists_locked(std::string_view key) const {
    return layer_map(Layer::kEpisodic).count(std::string(key)) > 0;
}

PrepareToken Kernel::prepare(Transaction& tx) {
    if (tx.status_ != Transaction::Status::kOpen) {
        throw Error(ErrorCode::kTxClosed, "prepare on a non-open transaction");
    }
    StagedTx staged{tx.snapshot_, std::move(tx.writes_)};
    tx.writes_.clear();
    tx.status_ = Transaction::Status::kPrepared;
    std::lock_guard lock(commit_mutex_);
    prepared_.emplace(tx.id_, std::move(staged));
    return PrepareToken{tx.id_};
}

CutId Kernel::commit(const PrepareToken& token) {
    std::lock_guard commit_lock(commit_mutex_);
    auto it = prepared_.find(token.tx_id);
    if (it == prepared_.end()) {
        throw Error(ErrorCode::kTxClosed,
                    "no prepared transaction with id " + std::to_string(token.tx_id));
    }
    StagedTx staged = std::move(it->second);
    prepared_.erase(it);
    return apply_staged(token.tx_id, std::move(staged));
}

CutId Kernel::apply_staged(std::uint64_t tx_id, StagedTx&& staged) {
    std::unique_lock store_lock(store_mutex_);

    // First committer wins: any version of a state/semantic key committed
    // after our snapshot conflicts. Episodic keys must still be fresh.
    for (const PendingWrite& w : staged.writes) {
        if (w.layer == Layer::kEpisodic) {
            if (episodic_key_exists_locked(w.key)) {
                throw Error(ErrorCode::kEpisodicRevision,
                            "episodic key '" + w.key + "' committed concurrently");
            }
            continue;
        }
        auto chain_it = layer_map(w.layer).find(w.key);
        if (chain_it != layer_map(w.layer).end() && !chain_it->second.empty() &&
            chain_it->second.back().from > staged.snapshot.value) {
            throw Error(ErrorCode::kWriteConflict,
                        "key '" + w.key + "' on layer " + std::string(layer_name(w.layer)) +
                            " was committed after snapshot " +
                            std::to_string(staged.snapshot.value));
        }
    }

    // Validation hooks see the value the write would supersede.
    CutId pre_commit{latest_cut_.load(std::memory_order_relaxed)};
    for (const PendingWrite& w : staged.writes) {
        const CommitValidator& validator = validators_[static_cast<std::size_t>(w.layer)];
        if (!validator) continue;
        std::optional<Bytes> old_value = read_locked(pre_commit, w.layer, w.key);
        if (auto reason = validator(w.key, old_value, w.value)) {
            throw Error(ErrorCode::kTransitionRejected,
                        "commit of tx " + std::to_string(tx_id) + " rejected: " + *reason);
        }
    }

    std::uint64_t new_cut = latest_cut_.load(std::memory_order_relaxed) + 1;
    for (const PendingWrite& w : staged.writes) {
        Chain& chain = layer_map(w.layer)[w.key];
        if (!chain.empty() && !chain.back().to) {
            chain.back().to = new_cut;
        }
        chain.push_back(Version{w.value, new_cut, std::nullopt});
    }

    std::uint64_t now_ms = std::max(clock_.now().millis, commit_times_ms_.back());
    commit_times_ms_.push_back(now_ms);
    latest_cut_.store(new_cut, std::memory_order_release);
    store_lock.unlock();

    // JSONL lines appear in commit order; commit_mutex_ is still held.
    if (episodic_log_) {
        for (const PendingWrite& w : staged.writes) {
            if (w.layer != Layer::kEpisodic) continue;
            const EpisodicMeta meta = w.episodic_meta.value_or(EpisodicMeta{});
            json line = {{"seq", meta.seq},
                         {"time_ms", meta.time_ms},
                         {"key", w.key},
                         {"value_b64", base64_encode(w.value.value_or(""))}};
            *episodic_log_ << line.dump() << '\n';
        }
        episodic_log_->flush();
    }
    return CutId{new_cut};
}

void Kernel::abort(const PrepareToken& token) {
    std::lock_guard lock(commit_mutex_);
    prepared_.erase(token.tx_id);
}

CutId Kernel::commit_tx(Transaction& tx) {
    PrepareToken token = prepare(tx);
    try {
        CutId cut = commit(token);
        tx.status_ = Transaction::Status::kCommitted;
        return cut;
    } catch (...) {
        tx.status_ = Transaction::Status::kAborted;
        throw;
    }
}

void Kernel::abort_tx(Transaction& tx) {
    if (tx.status_ == Transaction::Status::kOpen) {
        tx.writes_.clear();
        tx.status_ = Transaction::Status::kAborted;
        return;
    }
    if (tx.status_ == Transaction::Status::kPrepared) {
        abort(PrepareToken{tx.id_});
        tx.status_ = Transaction::Status::kAborted;
        return;
    }
    throw Error(ErrorCode::kTxClosed, "abort_tx on a finished transaction");
}

LogicalTime Kernel::commit_time(CutId cut) const {
    std::shared_lock lock(store_mutex_);
    if (cut.value >= commit_times_ms_.size()) {
        throw Error(ErrorCode::kUnknownCut,
                    "cut " + std::to_string(cut.value) + " has no commit time");
    }
    return LogicalTime{commit_times_ms_[cut.value]};
}

CutId Kernel::cut_at_or_before(LogicalTime t) const {
    std::shared_lock lock(store_mutex_);
    auto it = std::upper_bound(commit_times_ms_.begin(), commit_times_ms_.end(), t.millis);
    return CutId{static_cast<std::uint64_t>(it - commit_times_ms_.begin()) - 1};
}

void Kernel::set_commit_validator(Layer layer, CommitValidator validator) {
    std::lock_guard lock(commit_mutex_);
    validators_[static_cast<std::size_t>(layer)] = std::move(validator);
}

void Kernel::set_episodic_log(const std::filesystem::path& path) {
    auto stream = std::make_unique<std::ofstream>(path, std::ios::app | std::ios::binary);
    if (!*stream) {
        throw Error(ErrorCode::kInvalidConfig, "cannot open episodic log " + path.string());
    }
    std::lock_guard lock(commit_mutex_);
    episodic_log_ = std::move(stream);
}

std::size_t Kernel::replay_episodic_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kParseError, "cannot open episodic log " + path.string());
    }
    std::size_t applied = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
            Transaction tx = begin_tx();
            tx_write_episodic(tx, obj.at("key").get<std::string>(),
                              base64_decode(obj.at("value_b64").get<std::string>()),
                              obj.at("seq").get<std::uint64_t>(),
                              obj.at("time_ms").get<std::uint64_t>());
            commit_tx(tx);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kParseError, "episodic log line " + std::to_string(line_no) +
                                                    ": " + e.what());
        }
        ++applied;
    }
    return applied;
}

}  // namespace ctxlake
