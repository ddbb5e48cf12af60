#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mvflow/measures.hpp"
#include "mvflow/sde_solver.hpp"

namespace mvflow {

/// A drift together with the constants its constructor can certify.
struct DriftComponent {
    std::size_t dim = 1;
    Drift drift;
    double K2 = 1.0;
    double K3 = 1.0;
    double theta = 1.0;
    bool tv_lipschitz = false;
    bool measure_independent = false;
};

/// b~_t(x, y), written into `out`.
using ConvolutionKernel =
    std::function<void(double t, std::span<const double> x, std::span<const double> y, std::span<double> out)>;

/// b_t(x, gamma) = sum_i w_i b~_t(x, y_i). `bound` bounds |b~_t(x, y) - c_t(x)|
/// for some c (half the oscillation in y; sup |b~| always qualifies), `lip` is
/// the Lipschitz constant in (x, y). K3 = 2 bound, K2 = lip with theta = 1.
DriftComponent conv_drift(std::size_t dim, ConvolutionKernel kernel, double bound, double lip);

/// b~_t(x, r) for the moment drift.
using MomentOuter = std::function<void(double t, std::span<const double> x, double r, std::span<double> out)>;
using MomentFunctional = std::function<double(std::span<const double> y)>;

/// b_t(x, gamma) = outer(t, x, gamma(phi)). K3 = lip_r * oscillation(phi),
/// infinite (and not TV-Lipschitz) when phi is unbounded.
struct MomentConstants {
    double lip_x = 1.0;
    double lip_r = 1.0;
    double phi_oscillation = INFINITY;
    double phi_lipschitz = 1.0;
};
DriftComponent moment_drift(std::size_t dim, MomentOuter outer, MomentFunctional phi,
                            const MomentConstants& constants);

/// h(t, x, r, s) with r = W_theta(gamma, reference) and s = ||gamma - reference||_TV.
using FeedbackTerm =
    std::function<void(double t, std::span<const double> x, double r, double s, std::span<double> out)>;

struct FeedbackConstants {
    double lip_x = 0.0;
    double lip_r = 0.0;
    double lip_s = 0.0;
};

/// base(t, x, gamma) + h(t, x, W_theta(gamma, ref), s). s is the exact TV to ref when ref
/// has at most binning.atomic_support_limit atoms, else the TV of gamma and ref binned on
/// a lattice built from ref alone (edge cells absorb the outside).
DriftComponent feedback_drift(DriftComponent base, FeedbackTerm h, EmpiricalMeasure reference,
                              double theta, const FeedbackConstants& constants,
                              const BinningRule& binning = {});

/// sign(x) |x|^(-1/4) on [-1, 1], zero elsewhere and at 0.
double singular_profile(double x) noexcept;
DriftComponent singular_drift_1d();

/// sigma_t(x) = matrix (row-major d x m) for all (t, x).
Diffusion constant_diffusion(std::vector<double> matrix, std::size_t dim_noise);

/// Smallest K >= 1 with K^-1 I <= A A^T <= K I for a constant matrix A.
double ellipticity_constant(std::span<const double> matrix, std::size_t dim, std::size_t dim_noise);

CoefficientSet assemble(std::string name, const DriftComponent& drift, Diffusion diffusion,
                        std::size_t dim_noise, double K1);

/// Named presets: conv_ou, conv_tanh, moment, feedback, singular1d.
/// `params` holds the numeric preset parameters; unknown names throw.
CoefficientSet make_preset(const std::string& name, const std::map<std::string, double>& params);

/// Parameter names understood by a preset, with their defaults.
std::map<std::string, double> preset_defaults(const std::string& name);

struct ValidationReport {
    std::size_t probes = 0;
    std::uint64_t seed = 0;

    double K1 = 0.0;
    double min_eigenvalue = INFINITY;
    double max_eigenvalue = 0.0;
    bool ellipticity_ok = true;

    double K3 = 0.0;
    bool tv_lipschitz_declared = false;
    double max_tv_ratio = 0.0;
    bool tv_lipschitz_ok = true;

    bool growth_checked = false;
    double max_growth_excess = -INFINITY;  // max of <b(x, delta_0), x> - Gamma(|x|^2)
    bool growth_ok = true;

    bool passed() const noexcept { return ellipticity_ok && tv_lipschitz_ok && growth_ok; }
};

/// Probes sigma sigma^* eigenvalues, the TV-Lipschitz ratio of the drift on
/// random pairs of atomic measures sharing support, and the growth bound.
ValidationReport validate_coefficients(const CoefficientSet& coeffs, std::size_t probes,
                                       std::uint64_t seed);

}  // namespace mvflow
