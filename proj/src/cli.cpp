#include "ctxlake/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxlake/analyzer.hpp"
#include "ctxlake/composed.hpp"
#include "ctxlake/scenario.hpp"

namespace ctxlake {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitClean = 0;
constexpr int kExitViolations = 1;
constexpr int kExitConfigError = 2;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("CTXLAKE_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw Error(ErrorCode::kInvalidConfig, "CTXLAKE_SEED is not a number");
        }
    }
    return 1;
}

std::map<std::string, std::uint64_t> parse_lags(const std::vector<std::string>& specs) {
    std::map<std::string, std::uint64_t> lags;
    for (const std::string& spec : specs) {
        std::size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::kInvalidConfig, "--lag expects kind=ms, got '" + spec + "'");
        }
        try {
            lags[spec.substr(0, eq)] = std::stoull(spec.substr(eq + 1));
        } catch (const Error&) {
            throw;
        } catch (...) {
            throw Error(ErrorCode::kInvalidConfig, "bad lag value in '" + spec + "'");
        }
    }
    return lags;
}

std::vector<std::uint64_t> parse_grid(const std::string& spec) {
    std::vector<std::uint64_t> values;
    if (spec.empty()) return values;
    if (spec.find(':') != std::string::npos) {  // start:end:step
        std::uint64_t start = 0, end = 0, step = 0;
        if (std::sscanf(spec.c_str(), "%llu:%llu:%llu", (unsigned long long*)&start,
                        (unsigned long long*)&end, (unsigned long long*)&step) != 3 ||
            step == 0) {
            throw Error(ErrorCode::kInvalidConfig, "--lag-grid range must be start:end:step");
        }
        for (std::uint64_t v = start; v <= end; v += step) values.push_back(v);
        return values;
    }
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t comma = spec.find(',', pos);
        std::string token = spec.substr(pos, comma == std::string::npos ? std::string::npos
                                                                        : comma - pos);
        if (!token.empty()) {
            try {
                values.push_back(std::stoull(token));
            } catch (...) {
                throw Error(ErrorCode::kInvalidConfig, "bad grid value '" + token + "'");
            }
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return values;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::kInvalidConfig, "cannot write " + path.string());
    }
    out << content;
}

json run_report_json(const RunResult& result, const ViolationReport& analysis) {
    json invalid = json::array();
    for (const InvalidOutcome& outcome : result.invalid_outcomes) {
        invalid.push_back({{"decision_id", outcome.decision_id}, {"reason", outcome.reason}});
    }
    json codes = json::object();
    for (const auto& [code, count] : result.metrics.violations_by_code) codes[code] = count;
    json report = analysis.to_json();
    report["config"] = result.config.to_json();
    report["invalid_outcomes"] = std::move(invalid);
    report["symptoms"] = result.symptoms.to_json();
    report["envelope"] = {{"decisions", result.metrics.decisions},
                          {"admitted", result.metrics.admitted},
                          {"rejected", result.metrics.rejected},
                          {"rejections_by_violation", std::move(codes)},
                          {"over_envelope", result.metrics.over_envelope},
                          {"peak_in_flight", result.metrics.peak_in_flight},
                          {"max_premise_age_ms", result.metrics.max_premise_age_ms},
                          {"retrievals", result.metrics.retrievals}};
    return report;
}

int cmd_run(const RunConfig& config, const std::string& out_dir) {
    RunResult result = run_scenario(config);
    ViolationReport analysis = analyze(result.trace);

    std::string stem = config.scenario + "_" + config.mode +
                       (config.variant.empty() ? "" : "_" + config.variant) + "_seed" +
                       std::to_string(config.seed);
    fs::path trace_path = fs::path(out_dir) / (stem + ".trace.jsonl");
    fs::path report_path = fs::path(out_dir) / (stem + ".report.json");
    fs::create_directories(out_dir);
    write_file(trace_path, result.trace_text());
    write_file(report_path, run_report_json(result, analysis).dump(2) + "\n");

    std::uint64_t violations = analysis.total_violations();
    std::cout << config.scenario << " " << config.mode << " seed=" << config.seed
              << ": decisions=" << analysis.decisions << " admitted=" << analysis.admitted
              << " violations=" << violations << " anomalies=" << analysis.anomalies.size()
              << " invalid=" << result.invalid_outcomes.size() << " -> " << trace_path.string()
              << "\n";
    bool clean = analysis.clean() && result.invalid_outcomes.empty();
    return clean ? kExitClean : kExitViolations;
}

int cmd_check(const std::string& trace_path, std::optional<std::uint64_t> delta_override,
              const std::string& out_path) {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot open trace " << trace_path << "\n";
        return kExitConfigError;
    }
    ViolationReport report = analyze_stream(in, delta_override);
    std::string rendered = report.to_json().dump(2) + "\n";
    if (!out_path.empty()) {
        write_file(out_path, rendered);
    }
    std::cout << rendered;
    return report.clean() ? kExitClean : kExitViolations;
}

int cmd_sweep(RunConfig base, const std::string& lag_kind, const std::string& grid_spec,
              const std::string& seeds_spec, const std::string& out_dir) {
    std::vector<std::uint64_t> grid = parse_grid(grid_spec);
    std::vector<std::uint64_t> seeds = parse_grid(seeds_spec);
    if (grid.empty() || seeds.empty()) {
        throw Error(ErrorCode::kInvalidConfig, "sweep needs a non-empty --lag-grid and --seeds");
    }
    LagKind kind = lag_kind_from_name(lag_kind);
    base.validate();

    ComparisonReport report = run_comparison(base, kind, grid, seeds);
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "sweep.csv", report.to_csv());
    write_file(fs::path(out_dir) / "sweep.json", report.to_json().dump(2) + "\n");

    std::uint64_t composed_bad = 0, lake_bad = 0;
    for (const ComparisonRow& row : report.rows) {
        std::uint64_t bad = row.coherence_violations + row.invalid_outcomes;
        (row.mode == "composed" ? composed_bad : lake_bad) += bad;
    }
    std::cout << "sweep " << base.scenario << " kind=" << lag_kind << " grid=" << grid_spec
              << " seeds=" << seeds_spec << ": composed violations+invalid=" << composed_bad
              << ", contextlake=" << lake_bad << " -> " << (fs::path(out_dir) / "sweep.csv").string()
              << "\n";
    return kExitClean;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Context-coherent store, simulator and trace analyzer"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run one scenario and analyze its trace");
    std::string scenario, mode = "contextlake", variant, out_dir = "out";
    std::uint64_t delta_ms = 100, seed = 0;
    std::uint32_t max_concurrent = 4;
    bool seed_given = false;
    std::vector<std::string> lag_specs;
    run->add_option("--scenario", scenario, "warehouse|checkout|load_sweep|failure_matrix")
        ->required();
    run->add_option("--mode", mode, "contextlake|composed");
    run->add_option("--delta-ms", delta_ms, "temporal envelope, logical ms");
    run->add_option("--max-concurrent", max_concurrent, "concurrency envelope");
    run->add_option("--seed", seed, "deterministic seed (default: CTXLAKE_SEED or 1)")
        ->each([&seed_given](const std::string&) { seed_given = true; });
    run->add_option("--lag", lag_specs, "composed lag, kind=ms (repeatable)");
    run->add_option("--variant", variant, "failure_matrix variant");
    run->add_option("--out", out_dir, "output directory");

    // check
    auto* check = app.add_subcommand("check", "Re-validate a trace file");
    std::string trace_path, check_out;
    std::uint64_t check_delta = 0;
    bool check_delta_given = false;
    check->add_option("--trace", trace_path, "trace JSONL path")->required();
    check->add_option("--delta-ms", check_delta, "override the envelope delta")
        ->each([&check_delta_given](const std::string&) { check_delta_given = true; });
    check->add_option("--out", check_out, "also write the report JSON here");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Compare architectures across a lag grid");
    std::string sweep_scenario, lag_kind = "replica", lag_grid, seeds_spec = "1",
                sweep_out = "out";
    std::uint64_t sweep_delta = 100;
    std::uint32_t sweep_concurrent = 4;
    sweep->add_option("--scenario", sweep_scenario, "warehouse|checkout")->required();
    sweep->add_option("--lag-kind", lag_kind, "replica|index|cache|batch");
    sweep->add_option("--lag-grid", lag_grid, "comma list or start:end:step")->required();
    sweep->add_option("--seeds", seeds_spec, "comma list of seeds");
    sweep->add_option("--delta-ms", sweep_delta, "temporal envelope, logical ms");
    sweep->add_option("--max-concurrent", sweep_concurrent, "concurrency envelope");
    sweep->add_option("--out", sweep_out, "output directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitClean;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfigError;
    }

    try {
        if (run->parsed()) {
            RunConfig config;
            config.scenario = scenario;
            config.mode = mode;
            config.delta_ms = delta_ms;
            config.max_concurrent = max_concurrent;
            config.seed = seed_given ? seed : default_seed();
            config.lags = parse_lags(lag_specs);
            config.variant = variant;
            config.validate();
            return cmd_run(config, out_dir);
        }
        if (check->parsed()) {
            return cmd_check(trace_path,
                             check_delta_given ? std::optional<std::uint64_t>(check_delta)
                                               : std::nullopt,
                             check_out);
        }
        if (sweep->parsed()) {
            RunConfig base;
            base.scenario = sweep_scenario;
            base.delta_ms = sweep_delta;
            base.max_concurrent = sweep_concurrent;
            base.seed = default_seed();
            return cmd_sweep(base, lag_kind, lag_grid, seeds_spec, sweep_out);
        }
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        switch (e.code()) {
            case ErrorCode::kUnknownScenario:
            case ErrorCode::kInvalidConfig:
            case ErrorCode::kParseError:
                return kExitConfigError;
            default:
                return kExitViolations;
        }
    }
    return kExitConfigError;
}

}  // namespace ctxlake
