#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvflow/measures.hpp"
#include "mvflow/sde_solver.hpp"

namespace mvflow {

/// Relative entropy estimate (nats) from per-path xi integrals.
struct KlEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double horizon = 0.0;
};

/// Per path, sum_{t_k < t} |xi_{t_k}|^2 h with
/// xi = sigma^*(sigma sigma^*)^-1 [b(X, mu_t) - b(X, nu_t)], along an ensemble
/// simulated under the nu-flow. `last_step` defaults to the end of the grid.
std::vector<double> xi_squared_integral(const CoefficientSet& coeffs, const MeasureFlow& mu_flow,
                                        const MeasureFlow& nu_flow, const PathEnsemble& ens);
std::vector<double> xi_squared_integral(const CoefficientSet& coeffs, const MeasureFlow& mu_flow,
                                        const MeasureFlow& nu_flow, const PathEnsemble& ens,
                                        std::size_t last_step);

/// KL estimates at every grid time t_0..t_n (the first is always 0).
std::vector<KlEstimate> kl_profile(const CoefficientSet& coeffs, const MeasureFlow& mu_flow,
                                   const MeasureFlow& nu_flow, const PathEnsemble& ens);

/// mean = half the sample mean, std_error = half the standard error.
KlEstimate kl_bound(std::span<const double> integrals, double horizon = 0.0);

/// sqrt(max(KL, 0) / 2).
double pinsker_tv_bound(const KlEstimate& kl);
/// Pinsker bound evaluated at the KL upper limit mean + z * std_error.
double pinsker_tv_upper(const KlEstimate& kl, double z = 3.0);

struct ContractionReport {
    std::vector<double> times;
    std::vector<double> lhs_tv;          // ||Phi_t(mu) - Phi_t(nu)||_TV
    std::vector<double> input_tv;        // ||mu_t - nu_t||_TV
    std::vector<double> rhs_quadrature;  // (K1 K3^2 / 4) sum_{s < t} ||mu_s - nu_s||^2 h
    std::vector<double> pinsker_bound;
    std::vector<double> pinsker_upper;   // at KL + 3 SE
    std::vector<double> kl_mean;
    std::vector<double> kl_se;
    /// W_theta counterparts of lhs_tv and input_tv; empty unless requested.
    std::vector<double> lhs_w;
    std::vector<double> input_w;
    double K1 = 1.0;
    double K3 = 1.0;
    double allowance = 0.0;
    double pinsker_allowance = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;

    /// max_t (lhs^2 - rhs)
    double max_excess() const;
    bool ert1_holds() const { return max_excess() <= allowance; }
    /// lhs <= pinsker_upper + pinsker_allowance at every time
    bool pinsker_holds() const;
};

/// Compares Phi(mu) and Phi(nu) under common random numbers against the
/// contraction inequality and the Pinsker route. `wasserstein_theta` >= 1
/// also fills lhs_w and input_w.
ContractionReport contraction_check_ert1(const CoefficientSet& coeffs, const InitialSampler& init,
                                         const MeasureFlow& mu_flow, const MeasureFlow& nu_flow,
                                         const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                         double allowance = 0.01, double pinsker_allowance = 0.02,
                                         const BinningRule& binning = {}, double wasserstein_theta = 0.0);

}  // namespace mvflow
