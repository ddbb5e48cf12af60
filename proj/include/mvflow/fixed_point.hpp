#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mvflow/measures.hpp"
#include "mvflow/sde_solver.hpp"

namespace mvflow {

/// Flow distance used to decide Picard convergence.
struct FlowMetric {
    enum class Kind { rho, rho_tilde };

    Kind kind = Kind::rho_tilde;
    double theta = 1.0;
    BinningRule binning;
    WassersteinOptions transport;

    static FlowMetric rho() { return {Kind::rho, 1.0, {}, {}}; }
    static FlowMetric rho_tilde(double theta) { return {Kind::rho_tilde, theta, {}, {}}; }
    /// "rho" or "rho_tilde"; anything else throws.
    static FlowMetric parse(const std::string& name, double theta);

    std::string name() const;
    /// Distance at one time: TV, plus W_theta for rho_tilde.
    double at(const EmpiricalMeasure& a, const EmpiricalMeasure& b) const;
    /// Max of `at` over grid indices [first, last].
    double over(const MeasureFlow& a, const MeasureFlow& b, std::size_t first, std::size_t last) const;
    double operator()(const MeasureFlow& a, const MeasureFlow& b) const {
        return over(a, b, 0, a.size() - 1);
    }
};

/// min{T, 1 / (K1 K3^2)}.
double window_horizon(double K1, double K3, double T);

/// Phi(flow): the law flow of the SDE with `flow` frozen in the drift.
MeasureFlow phi_map(const CoefficientSet& coeffs, const InitialSampler& init, const MeasureFlow& flow,
                    const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                    std::uint32_t stream = kCrnStream);

struct PicardOptions {
    FlowMetric metric;
    double tol = 0.02;
    std::size_t max_iter = 20;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 0;
    bool windowed = false;
};

struct PicardRecord {
    std::size_t iteration = 0;  // counted from 1 within each window
    double distance = 0.0;
    std::size_t window = 0;
};

struct PicardDiagnostics {
    std::string metric;
    std::vector<PicardRecord> records;
    /// [start, end] times of each window.
    std::vector<std::pair<double, double>> windows;
    std::vector<bool> window_converged;
    std::size_t iterations_used = 0;
    bool converged = false;

    std::vector<double> distances() const;
};

struct PicardResult {
    MeasureFlow flow;
    PicardDiagnostics diagnostics;
};

/// Picard iteration flow_k = Phi(flow_{k-1}) from the constant flow at the
/// initial law, with common random numbers across iterations. When windowed,
/// each window of length window_horizon is solved in turn and its paths
/// continue from their positions at the window start.
PicardResult picard_iterate(const CoefficientSet& coeffs, const InitialSampler& init, const TimeGrid& grid,
                            const PicardOptions& options);

/// Stream of the final independent run in solve_mvsde.
inline constexpr std::uint32_t kFreshStream = 1;

struct MvSolution {
    PathEnsemble paths;
    MeasureFlow flow;
    PicardDiagnostics diagnostics;
};

/// Picard iteration followed by one run along the converged flow on a fresh substream.
MvSolution solve_mvsde(const CoefficientSet& coeffs, const InitialSampler& init, const TimeGrid& grid,
                       const PicardOptions& options);

}  // namespace mvflow
