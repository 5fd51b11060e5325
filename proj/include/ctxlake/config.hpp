#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "ctxlake/types.hpp"

namespace ctxlake {

/// Scenario run configuration, mirrored one-to-one by the config JSON:
/// {scenario, mode, delta_ms, max_concurrent, seed, lags: {...}, variant,
/// prototypes: {...}}. Unknown fields are rejected.
struct RunConfig {
    std::string scenario;
    std::string mode = "contextlake";  // contextlake | composed
    std::uint64_t delta_ms = 100;
    std::uint32_t max_concurrent = 4;
    std::uint64_t seed = 1;
    /// Lag parameters (ms) for the composed baseline, keyed by policy kind:
    /// replica, index, cache, batch.
    std::map<std::string, std::uint64_t> lags;
    /// failure_matrix only: stale | overload | incoherent | implicit | full.
    std::string variant;
    /// Optional label -> prototype-text overrides for classification.
    std::map<std::string, std::string> prototypes;

    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    std::uint64_t lag(const std::string& kind) const {
        auto it = lags.find(kind);
        return it == lags.end() ? 0 : it->second;
    }
};

}  // namespace ctxlake
