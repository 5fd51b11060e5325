#include "ctxlake/config.hpp"

#include <set>

namespace ctxlake {

namespace {

using nlohmann::json;

const std::set<std::string> kScenarios = {"warehouse", "checkout", "load_sweep",
                                          "failure_matrix"};
const std::set<std::string> kModes = {"contextlake", "composed"};
const std::set<std::string> kLagKinds = {"replica", "index", "cache", "batch"};
const std::set<std::string> kVariants = {"stale", "overload", "incoherent", "implicit", "full"};

}  // namespace

void RunConfig::validate() const {
    if (!kScenarios.count(scenario)) {
        throw Error(ErrorCode::kUnknownScenario, "unknown scenario '" + scenario + "'");
    }
    if (!kModes.count(mode)) {
        throw Error(ErrorCode::kInvalidConfig, "unknown mode '" + mode + "'");
    }
    if (delta_ms < 1 || max_concurrent < 1) {
        throw Error(ErrorCode::kInvalidConfig, "delta_ms and max_concurrent must be >= 1");
    }
    for (const auto& [kind, _] : lags) {
        if (!kLagKinds.count(kind)) {
            throw Error(ErrorCode::kInvalidConfig, "unknown lag kind '" + kind + "'");
        }
    }
    if (scenario == "failure_matrix") {
        if (!kVariants.count(variant)) {
            throw Error(ErrorCode::kInvalidConfig,
                        "failure_matrix requires variant stale|overload|incoherent|implicit|full");
        }
    } else if (!variant.empty()) {
        throw Error(ErrorCode::kInvalidConfig,
                    "variant is only meaningful for failure_matrix");
    }
}

json RunConfig::to_json() const {
    json lags_json = json::object();
    for (const auto& [kind, ms] : lags) lags_json[kind] = ms;
    json prototypes_json = json::object();
    for (const auto& [label, text] : prototypes) prototypes_json[label] = text;
    json j = {{"scenario", scenario},
              {"mode", mode},
              {"delta_ms", delta_ms},
              {"max_concurrent", max_concurrent},
              {"seed", seed},
              {"lags", std::move(lags_json)}};
    if (!variant.empty()) j["variant"] = variant;
    if (!prototypes.empty()) j["prototypes"] = std::move(prototypes_json);
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) {
        throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
    }
    static const std::set<std::string> known = {"scenario", "mode", "delta_ms", "max_concurrent",
                                                "seed", "lags", "variant", "prototypes"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) {
            throw Error(ErrorCode::kInvalidConfig, "unknown config field '" + key + "'");
        }
    }

    RunConfig config;
    try {
        config.scenario = j.value("scenario", "");
        config.mode = j.value("mode", config.mode);
        config.delta_ms = j.value("delta_ms", config.delta_ms);
        config.max_concurrent = j.value("max_concurrent", config.max_concurrent);
        config.seed = j.value("seed", config.seed);
        config.variant = j.value("variant", "");
        if (j.contains("lags")) {
            for (const auto& [kind, ms] : j.at("lags").items()) {
                config.lags[kind] = ms.get<std::uint64_t>();
            }
        }
        if (j.contains("prototypes")) {
            for (const auto& [label, text] : j.at("prototypes").items()) {
                config.prototypes[label] = text.get<std::string>();
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kInvalidConfig, std::string("malformed config: ") + e.what());
    }
    config.validate();
    return config;
}

}  // namespace ctxlake
