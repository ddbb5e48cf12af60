#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvflow/measures.hpp"
#include "mvflow/rng.hpp"

namespace mvflow {

/// Uniform grid 0 = t_0 < ... < t_n = T with step h = T / n.
class TimeGrid {
public:
    TimeGrid(double t_end, std::size_t n_steps);

    double t_end() const noexcept { return t_end_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    double step() const noexcept { return step_; }
    double time(std::size_t k) const noexcept {
        return k == n_steps_ ? t_end_ : static_cast<double>(k) * step_;
    }
    std::vector<double> times() const;

    bool operator==(const TimeGrid&) const = default;

private:
    double t_end_;
    std::size_t n_steps_;
    double step_;
};

/// Drift with its measure argument frozen: x -> b_t(x, gamma), written into `out`.
using DriftField = std::function<void(std::span<const double> x, std::span<double> out)>;

/// b_t(., gamma). The returned field may reference `gamma`; callers keep the
/// measure alive while the field is in use. Must be pure and reentrant.
using Drift = std::function<DriftField(double t, const EmpiricalMeasure& gamma)>;

/// sigma_t(x) as a row-major d x m matrix. Measure-free by construction.
using Diffusion = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

/// Growth bound Gamma for <b_t(x, delta_0), x> <= Gamma(|x|^2).
using GrowthBound = std::function<double(double r)>;

/// Declared constants, in the normalization used by the stability and
/// contraction estimates.
struct CoefficientConstants {
    double K1 = 1.0;  // K1^-1 I <= sigma sigma^* <= K1 I
    double K2 = 1.0;  // Lipschitz constant w.r.t. TV + W_theta + |x - y|
    double K3 = 1.0;  // TV-Lipschitz constant of the drift
    double theta = 1.0;
    /// Whether K3 is an honest TV-Lipschitz certificate for the drift.
    bool tv_lipschitz = false;
};

/// |b|^2 in L_p^q with d/p + 2/q < 2.
struct IntegrabilityClass {
    double p = 0.0;
    double q = 0.0;
    std::string membership;

    bool admissible(std::size_t dim) const noexcept {
        return p > 1.0 && q > 1.0 && static_cast<double>(dim) / p + 2.0 / q < 2.0;
    }
};

struct CoefficientSet {
    std::string name;
    std::size_t dim_state = 1;
    std::size_t dim_noise = 1;
    Drift drift;
    Diffusion diffusion;
    CoefficientConstants constants;
    std::optional<IntegrabilityClass> integrability;
    std::optional<GrowthBound> growth_bound;
    /// true when b_t(x, gamma) does not depend on gamma
    bool measure_independent = false;

    /// Convenience pointwise evaluation.
    std::vector<double> drift_at(double t, std::span<const double> x,
                                 const EmpiricalMeasure& gamma) const;
    std::vector<double> diffusion_at(double t, std::span<const double> x) const;
};

/// Law of the initial value.
class InitialSampler {
public:
    enum class Kind { dirac, gaussian, mixture, empirical };

    static InitialSampler dirac(std::vector<double> x0);
    /// `covariance` is row-major d x d, symmetric positive semidefinite.
    static InitialSampler gaussian(std::vector<double> mean, std::vector<double> covariance);
    static InitialSampler isotropic_gaussian(std::vector<double> mean, double std_dev);
    static InitialSampler mixture(std::vector<std::pair<double, InitialSampler>> components);
    /// iid draws from the atoms; `systematic` maps path i to atom i when the
    /// requested sample size equals the support size.
    static InitialSampler empirical(EmpiricalMeasure measure, bool systematic = false);

    Kind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    bool finite_theta_moment() const noexcept { return true; }

    /// The i-th draw of the sample identified by (seed, stream).
    void draw(std::uint64_t seed, std::uint32_t stream, std::uint32_t index, std::size_t n,
              std::span<double> out) const;

private:
    InitialSampler() = default;
    void draw_with(const Substream& rng, std::uint64_t& cursor, std::uint32_t index,
                   std::size_t n, std::span<double> out) const;

    Kind kind_ = Kind::dirac;
    std::size_t dim_ = 0;
    std::vector<double> location_;     // dirac point or gaussian mean
    std::vector<double> covariance_factor_;  // row-major L with L L^T = covariance
    std::vector<double> mixture_cdf_;
    std::vector<InitialSampler> components_;
    std::shared_ptr<const EmpiricalMeasure> atoms_;
    std::vector<double> atom_cdf_;
    bool systematic_ = false;
};

/// N simulated trajectories on a time grid, stored time-major
/// (values[(k * N + i) * d + j]) so every marginal is a contiguous block.
class PathEnsemble {
public:
    PathEnsemble(TimeGrid grid, std::size_t n_paths, std::size_t dim,
                 std::shared_ptr<const std::vector<double>> values, std::uint64_t seed,
                 std::uint32_t stream);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t n_paths() const noexcept { return n_paths_; }
    std::size_t dim() const noexcept { return dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint32_t stream() const noexcept { return stream_; }
    /// (stream << 32) | path for each path.
    std::vector<std::uint64_t> path_stream_ids() const;

    double at(std::size_t path, std::size_t step, std::size_t coord) const noexcept {
        return (*values_)[(step * n_paths_ + path) * dim_ + coord];
    }
    std::span<const double> position(std::size_t path, std::size_t step) const noexcept {
        return {values_->data() + (step * n_paths_ + path) * dim_, dim_};
    }
    /// Uniform empirical measure of all paths at one grid step (no copy).
    EmpiricalMeasure marginal(std::size_t step) const;
    const std::shared_ptr<const std::vector<double>>& storage() const noexcept { return values_; }

private:
    TimeGrid grid_;
    std::size_t n_paths_;
    std::size_t dim_;
    std::shared_ptr<const std::vector<double>> values_;
    std::uint64_t seed_;
    std::uint32_t stream_;
};

/// Substream used by common-random-number runs; fresh runs use other values.
inline constexpr std::uint32_t kCrnStream = 0;

/// n uniform-weight draws from `init`, identical to the initial values of
/// the paths simulated with the same (seed, stream).
EmpiricalMeasure sample_initial(const InitialSampler& init, std::size_t n, std::uint64_t seed,
                                std::uint32_t stream = kCrnStream);

/// Euler-Maruyama for dX = b_t(X, mu_t) dt + sigma_t(X) dW with the flow mu frozen.
PathEnsemble euler_maruyama(const CoefficientSet& coeffs, const MeasureFlow& frozen_flow,
                            const InitialSampler& init, const TimeGrid& grid,
                            std::size_t n_paths, std::uint64_t seed,
                            std::uint32_t stream = kCrnStream);

/// Uniform empirical law of the ensemble at every grid time.
MeasureFlow ensemble_flow(const PathEnsemble& ensemble);

namespace detail {

/// How the drift's measure argument is obtained at step k.
enum class MeasureSource { frozen_flow, ensemble };

/// Shared Euler core over grid steps [first_step, last_step]. Positions at
/// first_step come from `start` (N x d) when given, else from the sampler.
/// Returns the time-major positions for steps first_step..last_step.
std::shared_ptr<const std::vector<double>> simulate(
    const CoefficientSet& coeffs, const MeasureFlow* frozen_flow, MeasureSource source,
    const InitialSampler& init, std::span<const double> start, const TimeGrid& grid,
    std::size_t first_step, std::size_t last_step, std::size_t n_paths, std::uint64_t seed,
    std::uint32_t stream);

}  // namespace detail

}  // namespace mvflow
