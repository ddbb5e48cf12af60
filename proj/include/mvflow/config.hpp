#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mvflow/fixed_point.hpp"
#include "mvflow/sde_solver.hpp"

namespace mvflow {

/// Initial law from the `init.*` / `init_b.*` keys.
struct SamplerSpec {
    std::string kind = "gaussian";  // gaussian | dirac
    std::vector<double> mean{0.0};  // one value is broadcast over the dimension
    double std = 1.0;

    InitialSampler build(std::size_t dim) const;
};

/// Parametric measure flow from the `flow_a.*` / `flow_b.*` keys.
///   dirac:     delta at location + velocity t
///   two_atom:  atoms left, right; mass at left moves linearly from p0 to p1 over [0, T]
///   gaussian:  `atoms` quantile points of N(mean + velocity t, std^2)
/// Every coordinate receives the same value in d > 1.
struct FlowSpec {
    std::string kind = "dirac";
    double location = 0.0;
    double velocity = 0.0;
    double left = -1.0;
    double right = 1.0;
    double p0 = 0.5;
    double p1 = 0.5;
    double mean = 0.0;
    double std = 1.0;
    std::size_t atoms = 64;

    MeasureFlow build(const TimeGrid& grid, std::size_t dim) const;
};

struct ExperimentConfig {
    std::string kind;  // empty when the file leaves it to the subcommand
    std::string preset;
    std::map<std::string, double> preset_params;
    SamplerSpec init;
    SamplerSpec init_b;
    bool has_init_b = false;
    double t_end = 1.0;
    std::size_t n_steps = 100;
    std::size_t n_paths = 10000;
    double theta = 1.0;
    std::string metric = "rho_tilde";
    double tol = 0.02;
    std::size_t max_iter = 20;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    bool windowed = false;
    double allowance = 0.01;
    double binning_allowance = 0.02;
    std::size_t probes = 1000;
    FlowSpec flow_a;
    FlowSpec flow_b;
    bool has_flows = false;
    std::vector<std::size_t> chaos_particles{100, 1000, 10000};
    std::size_t chaos_oracle_paths = 100000;
    bool export_flow = false;
    bool export_paths = false;

    std::string source_text;  // the file as read, for the manifest
    std::map<std::string, std::size_t> key_lines;  // keys present, with their line numbers

    TimeGrid grid() const { return {t_end, n_steps}; }
    CoefficientSet coefficients() const;
    PicardOptions picard_options() const;
};

/// Parses `key = value` lines. Values are numbers, true/false, or strings
/// (bare words or double-quoted). Throws ConfigError naming the line on
/// unknown, duplicate or ill-typed keys.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Throws ConfigError when a key needed by `kind` is absent or the file names another kind.
void require_for(const ExperimentConfig& cfg, const std::string& kind);

}  // namespace mvflow
