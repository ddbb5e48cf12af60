#include "mvflow/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Dense>

#include "mvflow/error.hpp"
#include "mvflow/rng.hpp"

namespace mvflow {

namespace {

double at_least_one(double k) { return std::max(1.0, k); }

void require_finite_constant(double value, const char* what) {
    if (!(value >= 0.0)) throw InvalidArgument(std::string(what) + " must be nonnegative");
}

}  // namespace

DriftComponent conv_drift(std::size_t dim, ConvolutionKernel kernel, double bound, double lip) {
    if (dim == 0) throw InvalidArgument("conv_drift: dimension must be positive");
    if (!kernel) throw InvalidArgument("conv_drift: missing kernel");
    require_finite_constant(bound, "conv_drift: bound");
    require_finite_constant(lip, "conv_drift: lip");

    DriftComponent c;
    c.dim = dim;
    c.K2 = at_least_one(lip);
    c.theta = 1.0;
    c.K3 = at_least_one(2.0 * bound);
    c.tv_lipschitz = std::isfinite(bound);
    auto shared = std::make_shared<const ConvolutionKernel>(std::move(kernel));
    c.drift = [dim, shared](double t, const EmpiricalMeasure& gamma) -> DriftField {
        if (gamma.dim() != dim) throw InvalidArgument("conv_drift: measure dimension mismatch");
        return [t, dim, shared, gamma](std::span<const double> x, std::span<double> out) {
            double term[8];
            std::vector<double> heap;
            double* tp = term;
            if (dim > 8) {
                heap.resize(dim);
                tp = heap.data();
            }
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t i = 0; i < gamma.size(); ++i) {
                (*shared)(t, x, gamma.point(i), std::span<double>(tp, dim));
                const double w = gamma.weight(i);
                for (std::size_t j = 0; j < dim; ++j) out[j] += w * tp[j];
            }
        };
    };
    return c;
}

DriftComponent moment_drift(std::size_t dim, MomentOuter outer, MomentFunctional phi,
                            const MomentConstants& k) {
    if (dim == 0) throw InvalidArgument("moment_drift: dimension must be positive");
    if (!outer || !phi) throw InvalidArgument("moment_drift: missing outer map or functional");
    require_finite_constant(k.lip_x, "moment_drift: lip_x");
    require_finite_constant(k.lip_r, "moment_drift: lip_r");

    DriftComponent c;
    c.dim = dim;
    c.theta = 1.0;
    c.K2 = at_least_one(std::max(k.lip_x, k.lip_r * k.phi_lipschitz));
    c.tv_lipschitz = std::isfinite(k.phi_oscillation);
    c.K3 = c.tv_lipschitz ? at_least_one(k.lip_r * k.phi_oscillation) : INFINITY;
    auto shared = std::make_shared<const MomentOuter>(std::move(outer));
    c.drift = [dim, shared, phi = std::move(phi)](
                  double t, const EmpiricalMeasure& gamma) -> DriftField {
        if (gamma.dim() != dim) throw InvalidArgument("moment_drift: measure dimension mismatch");
        double r = 0.0;
        for (std::size_t i = 0; i < gamma.size(); ++i) r += gamma.weight(i) * phi(gamma.point(i));
        if (!std::isfinite(r)) throw SimulationError("moment_drift: non-finite functional gamma(phi)");
        return [t, r, shared](std::span<const double> x, std::span<double> out) { (*shared)(t, x, r, out); };
    };
    return c;
}

namespace {

// Exact TV between gamma and the atomic law `atoms`.
double tv_to_atoms(const EmpiricalMeasure& gamma, const std::map<std::vector<double>, double>& atoms) {
    std::map<std::vector<double>, double> on_atoms;
    double outside = 0.0;
    std::vector<double> key(gamma.dim());
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        const auto p = gamma.point(i);
        key.assign(p.begin(), p.end());
        if (atoms.count(key)) {
            on_atoms[key] += gamma.weight(i);
        } else {
            outside += gamma.weight(i);
        }
    }
    double diff = outside;
    for (const auto& [x, w] : atoms) {
        const auto it = on_atoms.find(x);
        diff += std::abs((it == on_atoms.end() ? 0.0 : it->second) - w);
    }
    return std::clamp(0.5 * diff, 0.0, 1.0);
}

}  // namespace

DriftComponent feedback_drift(DriftComponent base, FeedbackTerm h, EmpiricalMeasure reference,
                              double theta, const FeedbackConstants& k, const BinningRule& binning) {
    if (!base.drift || !h) throw InvalidArgument("feedback_drift: missing base drift or feedback term");
    if (reference.dim() != base.dim) throw InvalidArgument("feedback_drift: reference dimension mismatch");
    if (!(theta >= 1.0)) throw InvalidArgument("feedback_drift: theta must be >= 1");
    require_finite_constant(k.lip_x, "feedback_drift: lip_x");
    require_finite_constant(k.lip_r, "feedback_drift: lip_r");
    require_finite_constant(k.lip_s, "feedback_drift: lip_s");

    DriftComponent c;
    c.dim = base.dim;
    c.theta = std::max(base.theta, theta);
    c.K2 = at_least_one(base.K2 + k.lip_x + k.lip_r + k.lip_s);
    c.tv_lipschitz = (base.tv_lipschitz || base.measure_independent) && k.lip_r == 0.0;
    c.K3 = c.tv_lipschitz ? at_least_one((base.measure_independent ? 0.0 : base.K3) + k.lip_s) : INFINITY;
    c.measure_independent = false;
    const std::size_t dim = base.dim;
    auto shared = std::make_shared<const FeedbackTerm>(std::move(h));
    // s must stay 1-Lipschitz in TV: exact against an atomic reference, else
    // binned on a lattice fixed by the reference (a pushforward). A lattice
    // rebuilt from each pooled sample would break the certificate.
    auto atoms = std::make_shared<std::map<std::vector<double>, double>>();
    for (std::size_t i = 0; i < reference.size() && atoms->size() <= binning.atomic_support_limit; ++i) {
        const auto p = reference.point(i);
        (*atoms)[std::vector<double>(p.begin(), p.end())] += reference.weight(i);
    }
    std::shared_ptr<const BinLattice> lattice;
    if (atoms->size() > binning.atomic_support_limit) {
        atoms.reset();
        const EmpiricalMeasure* ref_only[] = {&reference};
        lattice = std::make_shared<const BinLattice>(make_lattice(ref_only, binning));
    }
    c.drift = [dim, base = std::move(base.drift), shared, reference = std::move(reference), theta, atoms,
               lattice](double t, const EmpiricalMeasure& gamma) -> DriftField {
        const double r = wasserstein(theta, gamma, reference);
        const double s = atoms ? tv_to_atoms(gamma, *atoms) : tv_on_lattice(*lattice, gamma, reference);
        DriftField inner = base(t, gamma);
        return [t, r, s, dim, shared, inner = std::move(inner)](std::span<const double> x, std::span<double> out) {
            inner(x, out);
            double extra[8];
            std::vector<double> heap;
            double* ep = extra;
            if (dim > 8) {
                heap.resize(dim);
                ep = heap.data();
            }
            (*shared)(t, x, r, s, std::span<double>(ep, dim));
            for (std::size_t j = 0; j < dim; ++j) out[j] += ep[j];
        };
    };
    return c;
}

double singular_profile(double x) noexcept {
    if (x == 0.0 || std::abs(x) > 1.0) return 0.0;
    return std::copysign(std::pow(std::abs(x), -0.25), x);
}

DriftComponent singular_drift_1d() {
    DriftComponent c;
    c.dim = 1;
    // Not Lipschitz in x; only the integrability class applies.
    c.K2 = INFINITY;
    c.K3 = 1.0;
    c.tv_lipschitz = true;
    c.measure_independent = true;
    c.drift = [](double, const EmpiricalMeasure&) -> DriftField {
        return [](std::span<const double> x, std::span<double> out) { out[0] = singular_profile(x[0]); };
    };
    return c;
}

Diffusion constant_diffusion(std::vector<double> matrix, std::size_t dim_noise) {
    if (dim_noise == 0 || matrix.empty() || matrix.size() % dim_noise != 0) {
        throw InvalidArgument("constant_diffusion: matrix must be d x m");
    }
    return [matrix = std::move(matrix)](double, std::span<const double>, std::span<double> out) {
        std::copy(matrix.begin(), matrix.end(), out.begin());
    };
}

namespace {

Eigen::VectorXd gram_eigenvalues(std::span<const double> a, std::size_t d, std::size_t m) {
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(
        a.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
    const Eigen::MatrixXd gram = A * A.transpose();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues();
}

}  // namespace

double ellipticity_constant(std::span<const double> matrix, std::size_t dim, std::size_t dim_noise) {
    if (matrix.size() != dim * dim_noise) throw InvalidArgument("ellipticity_constant: matrix must be d x m");
    const auto ev = gram_eigenvalues(matrix, dim, dim_noise);
    if (!(ev.minCoeff() > 0.0)) throw InvalidArgument("ellipticity_constant: sigma sigma^* is singular");
    return std::max({1.0, ev.maxCoeff(), 1.0 / ev.minCoeff()});
}

CoefficientSet assemble(std::string name, const DriftComponent& drift, Diffusion diffusion,
                        std::size_t dim_noise, double K1) {
    if (!(K1 >= 1.0)) throw InvalidArgument("assemble: K1 must be >= 1");
    CoefficientSet c;
    c.name = std::move(name);
    c.dim_state = drift.dim;
    c.dim_noise = dim_noise;
    c.drift = drift.drift;
    c.diffusion = std::move(diffusion);
    c.constants = {K1, drift.K2, drift.K3, drift.theta, drift.tv_lipschitz};
    c.measure_independent = drift.measure_independent;
    return c;
}

// ---------------------------------------------------------------------------
// Presets

std::map<std::string, double> preset_defaults(const std::string& name) {
    if (name == "conv_ou") return {{"dim", 1}, {"rate", 1.0}, {"sigma", 1.0}};
    if (name == "conv_tanh") {
        return {{"dim", 1}, {"rate", 1.0}, {"bound", 0.5}, {"scale", 3.0}, {"sigma", 1.0}};
    }
    if (name == "moment") return {{"dim", 1}, {"rate", 1.0}, {"coupling", 0.5}, {"sigma", 1.0}};
    if (name == "feedback") {
        return {{"dim", 1},       {"rate", 1.0},     {"sigma", 1.0},   {"gain_w", 0.5},
                {"gain_tv", 0.5}, {"theta", 1.0},    {"ref_mean", 0.0}, {"ref_std", 1.0},
                {"ref_size", 256}, {"ref_seed", 0}};
    }
    if (name == "singular1d") return {};
    throw InvalidArgument("unknown coefficient preset '" + name + "'");
}

namespace {

std::vector<double> scaled_identity(std::size_t d, double s) {
    std::vector<double> m(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) m[i * d + i] = s;
    return m;
}

std::size_t positive_count(double v, const char* what) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) {
        throw InvalidArgument(std::string("preset parameter '") + what + "' must be a positive integer");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

CoefficientSet make_preset(const std::string& name, const std::map<std::string, double>& params) {
    auto values = preset_defaults(name);
    for (const auto& [key, v] : params) {
        auto it = values.find(key);
        if (it == values.end()) {
            throw InvalidArgument("preset '" + name + "' has no parameter '" + key + "'");
        }
        if (!std::isfinite(v)) throw InvalidArgument("preset parameter '" + key + "' must be finite");
        it->second = v;
    }

    if (name == "singular1d") {
        auto c = assemble(name, singular_drift_1d(), constant_diffusion({1.0}, 1), 1, 1.0);
        c.integrability = IntegrabilityClass{1.5, 4.0, "|b|^2 in L^q([0,T]; L^p(R)) with (p, q) = (3/2, 4)"};
        return c;
    }

    const std::size_t d = positive_count(values.at("dim"), "dim");
    const double sigma = values.at("sigma");
    if (!(sigma > 0.0)) throw InvalidArgument("preset parameter 'sigma' must be positive");
    const double rate = values.at("rate");
    const double K1 = std::max(sigma * sigma, 1.0 / (sigma * sigma));
    const double root_d = std::sqrt(static_cast<double>(d));
    Diffusion diffusion = constant_diffusion(scaled_identity(d, sigma), d);
    GrowthBound growth = [rate](double r) { return std::max(0.0, -rate) * r; };

    DriftComponent drift;
    if (name == "conv_ou") {
        // Kernel -rate (x - y); its average only needs the mean of gamma.
        drift.dim = d;
        drift.K2 = at_least_one(std::abs(rate));
        drift.theta = 1.0;
        drift.K3 = 1.0;
        drift.tv_lipschitz = false;
        drift.drift = [d, rate](double, const EmpiricalMeasure& gamma) -> DriftField {
            if (gamma.dim() != d) throw InvalidArgument("conv_ou: measure dimension mismatch");
            std::vector<double> m(d);
            for (std::size_t j = 0; j < d; ++j) m[j] = gamma.mean(j);
            return [rate, m = std::move(m)](std::span<const double> x, std::span<double> out) {
                for (std::size_t j = 0; j < m.size(); ++j) out[j] = -rate * (x[j] - m[j]);
            };
        };
    } else if (name == "conv_tanh") {
        const double bound = values.at("bound");
        const double scale = values.at("scale");
        drift = conv_drift(
            d,
            [rate, bound, scale](double, std::span<const double> x, std::span<const double> y,
                                 std::span<double> out) {
                for (std::size_t j = 0; j < x.size(); ++j) {
                    out[j] = -rate * x[j] + bound * std::tanh(scale * (y[j] - x[j]));
                }
            },
            std::abs(bound) * root_d, std::abs(rate) + std::abs(bound * scale));
    } else if (name == "moment") {
        const double coupling = values.at("coupling");
        MomentConstants k;
        k.lip_x = std::abs(rate);
        k.lip_r = std::abs(coupling) * root_d;
        k.phi_oscillation = 2.0;
        k.phi_lipschitz = 1.0;
        drift = moment_drift(
            d,
            [rate, coupling](double, std::span<const double> x, double r, std::span<double> out) {
                for (std::size_t j = 0; j < x.size(); ++j) out[j] = -rate * x[j] + coupling * r;
            },
            [](std::span<const double> y) { return std::tanh(y[0]); }, k);
    } else if (name == "feedback") {
        const double gain_w = values.at("gain_w");
        const double gain_tv = values.at("gain_tv");
        const std::size_t ref_size = positive_count(values.at("ref_size"), "ref_size");
        const double ref_std = values.at("ref_std");
        if (!(ref_std >= 0.0)) throw InvalidArgument("preset parameter 'ref_std' must be nonnegative");
        if (!(values.at("ref_seed") >= 0.0)) throw InvalidArgument("preset parameter 'ref_seed' must be nonnegative");
        const auto ref_seed = static_cast<std::uint64_t>(values.at("ref_seed"));
        const auto reference = sample_initial(
            InitialSampler::isotropic_gaussian(std::vector<double>(d, values.at("ref_mean")), ref_std), ref_size,
            ref_seed);

        DriftComponent base;
        base.dim = d;
        base.K2 = at_least_one(std::abs(rate));
        base.K3 = 1.0;
        base.tv_lipschitz = true;
        base.measure_independent = true;
        base.drift = [rate](double, const EmpiricalMeasure&) -> DriftField {
            return [rate](std::span<const double> x, std::span<double> out) {
                for (std::size_t j = 0; j < x.size(); ++j) out[j] = -rate * x[j];
            };
        };
        FeedbackConstants k;
        k.lip_r = std::abs(gain_w) * root_d;
        k.lip_s = std::abs(gain_tv) * root_d;
        drift = feedback_drift(
            std::move(base),
            [gain_w, gain_tv](double, std::span<const double>, double r, double s, std::span<double> out) {
                const double v = gain_w * std::tanh(r) + gain_tv * s;
                for (double& o : out) o = v;
            },
            reference, values.at("theta"), k);
        // |h(t, x, r, s)| <= |gain_w| + |gain_tv| per coordinate
        const double h_max = std::abs(gain_w) + std::abs(gain_tv);
        growth = [rate, h_max, d](double r) {
            return std::max(0.0, -rate) * r + h_max * std::sqrt(static_cast<double>(d) * r);
        };
    }

    auto c = assemble(name, drift, std::move(diffusion), d, K1);
    c.growth_bound = std::move(growth);
    return c;
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_coefficients(const CoefficientSet& coeffs, std::size_t probes,
                                       std::uint64_t seed) {
    if (probes == 0) throw InvalidArgument("validate_coefficients: probes must be positive");
    const std::size_t d = coeffs.dim_state;
    const std::size_t m = coeffs.dim_noise;
    constexpr std::size_t kAtoms = 4;
    constexpr double kRel = 1e-9;

    ValidationReport report;
    report.probes = probes;
    report.seed = seed;
    report.K1 = coeffs.constants.K1;
    report.K3 = coeffs.constants.K3;
    report.tv_lipschitz_declared = coeffs.constants.tv_lipschitz;
    report.growth_checked = static_cast<bool>(coeffs.growth_bound);

    const auto origin = EmpiricalMeasure::dirac(std::vector<double>(d, 0.0));
    std::vector<double> sigma(d * m), x(d), b0(d), ba(d), bb(d);
    for (std::size_t p = 0; p < probes; ++p) {
        const Substream rng(seed, 0, static_cast<std::uint32_t>(p), DrawPurpose::probe);
        std::uint64_t cursor = 0;
        const double t = rng.uniform(cursor++);
        for (double& v : x) v = 2.0 * rng.normal(cursor++);

        coeffs.diffusion(t, x, sigma);
        const auto ev = gram_eigenvalues(sigma, d, m);
        report.min_eigenvalue = std::min(report.min_eigenvalue, ev.minCoeff());
        report.max_eigenvalue = std::max(report.max_eigenvalue, ev.maxCoeff());

        // Two laws on one shared atomic support, so their TV is exact.
        std::vector<double> atoms(kAtoms * d), wa(kAtoms), wb(kAtoms);
        for (double& v : atoms) v = 2.0 * rng.normal(cursor++);
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < kAtoms; ++i) {
            wa[i] = rng.uniform(cursor++);
            wb[i] = rng.uniform(cursor++);
            sa += wa[i];
            sb += wb[i];
        }
        double tv = 0.0;
        for (std::size_t i = 0; i < kAtoms; ++i) {
            wa[i] /= sa;
            wb[i] /= sb;
        }
        for (std::size_t i = 0; i < kAtoms; ++i) tv += 0.5 * std::abs(wa[i] - wb[i]);
        const EmpiricalMeasure ga(d, atoms, wa), gb(d, atoms, wb);
        coeffs.drift(t, ga)(x, ba);
        coeffs.drift(t, gb)(x, bb);
        double diff = 0.0;
        for (std::size_t j = 0; j < d; ++j) diff += (ba[j] - bb[j]) * (ba[j] - bb[j]);
        if (tv > 1e-12) report.max_tv_ratio = std::max(report.max_tv_ratio, std::sqrt(diff) / tv);

        if (coeffs.growth_bound) {
            coeffs.drift(t, origin)(x, b0);
            double inner = 0.0, sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                inner += b0[j] * x[j];
                sq += x[j] * x[j];
            }
            report.max_growth_excess = std::max(report.max_growth_excess, inner - (*coeffs.growth_bound)(sq));
        }
    }

    const double K1 = coeffs.constants.K1;
    report.ellipticity_ok = report.min_eigenvalue >= (1.0 / K1) * (1.0 - kRel) &&
                            report.max_eigenvalue <= K1 * (1.0 + kRel);
    report.tv_lipschitz_ok = !report.tv_lipschitz_declared || report.max_tv_ratio <= report.K3 * (1.0 + kRel);
    report.growth_ok = !report.growth_checked || report.max_growth_excess <= 1e-12;
    return report;
}

}  // namespace mvflow
