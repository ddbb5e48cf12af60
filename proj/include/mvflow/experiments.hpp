#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mvflow/config.hpp"
#include "mvflow/io.hpp"

namespace mvflow {

inline constexpr const char* kVersion = "0.1.0";

/// A pass/fail comparison `value <= allowance`. Informational checks are
/// reported but do not fail the run.
struct BoundCheck {
    std::string name;
    double value = 0.0;
    double allowance = 0.0;
    bool informational = false;
    std::string note;

    bool passed() const { return value <= allowance; }
};

struct ExperimentReport {
    std::string kind;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    std::vector<BoundCheck> checks;
    std::map<std::string, io::CsvTable> tables;  // written as <name>.csv
    std::optional<MeasureFlow> flow;
    std::optional<PathEnsemble> paths;

    bool failed() const;
    /// 0 when every non-informational check passes, 2 otherwise.
    int exit_code() const { return failed() ? 2 : 0; }
};

ExperimentReport run_stability(const ExperimentConfig& cfg);
ExperimentReport run_contraction(const ExperimentConfig& cfg);
ExperimentReport run_picard(const ExperimentConfig& cfg);
ExperimentReport run_chaos(const ExperimentConfig& cfg);
ExperimentReport run_distances(const ExperimentConfig& cfg);
ExperimentReport run_validate(const ExperimentConfig& cfg);

/// Dispatch by subcommand name after require_for.
ExperimentReport run_experiment(const std::string& kind, const ExperimentConfig& cfg);

/// summary.json with the manifest and checks, one CSV per table, and the
/// optional flow/ directory and paths.csv.
void write_report(const ExperimentReport& report, const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace mvflow
