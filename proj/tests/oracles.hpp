#pragma once

// Independent test oracles. These deliberately avoid the library's version
// chains, heaps and indexes: reads replay a flat commit log from scratch,
// search is a full scan with a stable sort, serial equivalence enumerates
// permutations. Slow and obviously correct.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "ctxlake/types.hpp"

namespace ctxlake::testing {

struct NaiveWrite {
    Layer layer;
    std::string key;
    std::optional<Bytes> value;  // nullopt = delete
};

struct NaiveCommit {
    std::uint64_t cut;
    std::vector<NaiveWrite> writes;
};

/// Full-history replay store.
class NaiveStore {
public:
    void record(std::uint64_t cut, std::vector<NaiveWrite> writes) {
        commits_.push_back({cut, std::move(writes)});
    }

    std::optional<Bytes> read_at(std::uint64_t cut, Layer layer, const std::string& key) const {
        std::optional<Bytes> current;
        for (const NaiveCommit& c : commits_) {
            if (c.cut > cut) continue;
            for (const NaiveWrite& w : c.writes) {
                if (w.layer == layer && w.key == key) current = w.value;
            }
        }
        return current;
    }

    std::map<std::string, Bytes> layer_at(std::uint64_t cut, Layer layer) const {
        std::map<std::string, std::optional<Bytes>> staged;
        std::vector<const NaiveCommit*> ordered;
        for (const NaiveCommit& c : commits_) {
            if (c.cut <= cut) ordered.push_back(&c);
        }
        std::sort(ordered.begin(), ordered.end(),
                  [](const NaiveCommit* a, const NaiveCommit* b) { return a->cut < b->cut; });
        for (const NaiveCommit* c : ordered) {
            for (const NaiveWrite& w : c->writes) {
                if (w.layer == layer) staged[w.key] = w.value;
            }
        }
        std::map<std::string, Bytes> out;
        for (auto& [key, value] : staged) {
            if (value) out.emplace(key, *value);
        }
        return out;
    }

private:
    std::vector<NaiveCommit> commits_;
};

/// A committed transaction as seen by the serial-equivalence oracle: the
/// state-layer values it read and the state-layer values it wrote.
struct OracleTx {
    std::vector<std::pair<std::string, std::optional<Bytes>>> reads;
    std::vector<std::pair<std::string, std::optional<Bytes>>> writes;
};

/// True iff applying the transactions in some permutation (a) reproduces each
/// transaction's recorded reads at its turn and (b) ends in `final_state`.
inline bool serially_equivalent(const std::vector<OracleTx>& txs,
                                const std::map<std::string, Bytes>& final_state) {
    std::vector<std::size_t> order(txs.size());
    std::iota(order.begin(), order.end(), 0);
    do {
        std::map<std::string, std::optional<Bytes>> store;
        bool viable = true;
        for (std::size_t idx : order) {
            const OracleTx& tx = txs[idx];
            for (const auto& [key, expected] : tx.reads) {
                auto it = store.find(key);
                std::optional<Bytes> actual = it == store.end() ? std::nullopt : it->second;
                if (actual != expected) {
                    viable = false;
                    break;
                }
            }
            if (!viable) break;
            for (const auto& [key, value] : tx.writes) store[key] = value;
        }
        if (!viable) continue;
        std::map<std::string, Bytes> end_state;
        for (auto& [key, value] : store) {
            if (value) end_state.emplace(key, *value);
        }
        if (end_state == final_state) return true;
    } while (std::next_permutation(order.begin(), order.end()));
    return false;
}

}  // namespace ctxlake::testing
