#include "mvflow/sde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "mvflow/error.hpp"

namespace mvflow {

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(double t_end, std::size_t n_steps)
    : t_end_(t_end), n_steps_(n_steps), step_(0.0) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InvalidArgument("TimeGrid: T must be positive");
    if (n_steps == 0) throw InvalidArgument("TimeGrid: n_steps must be positive");
    step_ = t_end / static_cast<double>(n_steps);
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> out(n_steps_ + 1);
    for (std::size_t k = 0; k <= n_steps_; ++k) out[k] = time(k);
    return out;
}

// ---------------------------------------------------------------------------
// CoefficientSet

std::vector<double> CoefficientSet::drift_at(double t, std::span<const double> x,
                                             const EmpiricalMeasure& gamma) const {
    std::vector<double> out(dim_state, 0.0);
    drift(t, gamma)(x, out);
    return out;
}

std::vector<double> CoefficientSet::diffusion_at(double t, std::span<const double> x) const {
    std::vector<double> out(dim_state * dim_noise, 0.0);
    diffusion(t, x, out);
    return out;
}

// ---------------------------------------------------------------------------
// InitialSampler

InitialSampler InitialSampler::dirac(std::vector<double> x0) {
    if (x0.empty()) throw InvalidArgument("InitialSampler::dirac: empty point");
    InitialSampler s;
    s.kind_ = Kind::dirac;
    s.dim_ = x0.size();
    s.location_ = std::move(x0);
    return s;
}

InitialSampler InitialSampler::gaussian(std::vector<double> mean, std::vector<double> covariance) {
    const std::size_t d = mean.size();
    if (d == 0) throw InvalidArgument("InitialSampler::gaussian: empty mean");
    if (covariance.size() != d * d) {
        throw InvalidArgument("InitialSampler::gaussian: covariance must be d x d");
    }
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> cov(
        covariance.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InvalidArgument("InitialSampler::gaussian: covariance must be symmetric");
    }
    // Symmetric square root handles semidefinite covariances.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
        throw InvalidArgument("InitialSampler::gaussian: covariance is not positive semidefinite");
    }
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd factor = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();

    InitialSampler s;
    s.kind_ = Kind::gaussian;
    s.dim_ = d;
    s.location_ = std::move(mean);
    s.covariance_factor_.resize(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            s.covariance_factor_[i * d + j] =
                factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return s;
}

InitialSampler InitialSampler::isotropic_gaussian(std::vector<double> mean, double std_dev) {
    if (!(std_dev >= 0.0)) throw InvalidArgument("InitialSampler: std_dev must be nonnegative");
    const std::size_t d = mean.size();
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) cov[i * d + i] = std_dev * std_dev;
    return gaussian(std::move(mean), std::move(cov));
}

InitialSampler InitialSampler::mixture(std::vector<std::pair<double, InitialSampler>> components) {
    if (components.empty()) throw InvalidArgument("InitialSampler::mixture: no components");
    InitialSampler s;
    s.kind_ = Kind::mixture;
    s.dim_ = components.front().second.dim();
    double total = 0.0;
    for (auto& [w, c] : components) {
        if (!(w >= 0.0)) throw InvalidArgument("InitialSampler::mixture: negative weight");
        if (c.dim() != s.dim_) throw InvalidArgument("InitialSampler::mixture: dimension mismatch");
        total += w;
        s.mixture_cdf_.push_back(total);
        s.components_.push_back(std::move(c));
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw InvalidArgument("InitialSampler::mixture: weights must sum to 1");
    }
    s.mixture_cdf_.back() = 1.0;
    return s;
}

InitialSampler InitialSampler::empirical(EmpiricalMeasure measure, bool systematic) {
    InitialSampler s;
    s.kind_ = Kind::empirical;
    s.dim_ = measure.dim();
    double total = 0.0;
    for (std::size_t i = 0; i < measure.size(); ++i) {
        total += measure.weight(i);
        s.atom_cdf_.push_back(total);
    }
    s.atom_cdf_.back() = 1.0;
    s.atoms_ = std::make_shared<const EmpiricalMeasure>(std::move(measure));
    s.systematic_ = systematic;
    return s;
}

void InitialSampler::draw(std::uint64_t seed, std::uint32_t stream, std::uint32_t index,
                          std::size_t n, std::span<double> out) const {
    const Substream rng(seed, stream, index, DrawPurpose::initial);
    std::uint64_t cursor = 0;
    draw_with(rng, cursor, index, n, out);
}

void InitialSampler::draw_with(const Substream& rng, std::uint64_t& cursor, std::uint32_t index,
                               std::size_t n, std::span<double> out) const {
    switch (kind_) {
        case Kind::dirac:
            std::copy(location_.begin(), location_.end(), out.begin());
            return;
        case Kind::gaussian: {
            double z[8];
            std::vector<double> z_heap;
            double* zp = z;
            if (dim_ > 8) {
                z_heap.resize(dim_);
                zp = z_heap.data();
            }
            for (std::size_t j = 0; j < dim_; ++j) zp[j] = rng.normal(cursor++);
            for (std::size_t i = 0; i < dim_; ++i) {
                double v = location_[i];
                for (std::size_t j = 0; j < dim_; ++j) v += covariance_factor_[i * dim_ + j] * zp[j];
                out[i] = v;
            }
            return;
        }
        case Kind::mixture: {
            const double u = rng.uniform(cursor++);
            const auto it = std::lower_bound(mixture_cdf_.begin(), mixture_cdf_.end(), u);
            const auto c = std::min<std::size_t>(
                static_cast<std::size_t>(std::distance(mixture_cdf_.begin(), it)),
                components_.size() - 1);
            components_[c].draw_with(rng, cursor, index, n, out);
            return;
        }
        case Kind::empirical: {
            std::size_t atom = 0;
            if (systematic_ && n == atoms_->size()) {
                atom = index;
            } else {
                const double u = rng.uniform(cursor++);
                const auto it = std::lower_bound(atom_cdf_.begin(), atom_cdf_.end(), u);
                atom = std::min<std::size_t>(static_cast<std::size_t>(std::distance(atom_cdf_.begin(), it)),
                                             atoms_->size() - 1);
            }
            const auto p = atoms_->point(atom);
            std::copy(p.begin(), p.end(), out.begin());
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// PathEnsemble

PathEnsemble::PathEnsemble(TimeGrid grid, std::size_t n_paths, std::size_t dim,
                           std::shared_ptr<const std::vector<double>> values, std::uint64_t seed,
                           std::uint32_t stream)
    : grid_(grid), n_paths_(n_paths), dim_(dim), values_(std::move(values)), seed_(seed),
      stream_(stream) {
    if (n_paths_ == 0 || dim_ == 0) throw InvalidArgument("PathEnsemble: empty ensemble");
    if (!values_ || values_->size() != (grid_.n_steps() + 1) * n_paths_ * dim_) {
        throw InvalidArgument("PathEnsemble: storage size does not match N x (n+1) x d");
    }
}

std::vector<std::uint64_t> PathEnsemble::path_stream_ids() const {
    std::vector<std::uint64_t> ids(n_paths_);
    for (std::size_t i = 0; i < n_paths_; ++i) {
        ids[i] = (std::uint64_t{stream_} << 32) | static_cast<std::uint32_t>(i);
    }
    return ids;
}

EmpiricalMeasure PathEnsemble::marginal(std::size_t step) const {
    return EmpiricalMeasure::uniform_view(dim_, values_, step * n_paths_, n_paths_);
}

// ---------------------------------------------------------------------------
// Simulation

EmpiricalMeasure sample_initial(const InitialSampler& init, std::size_t n, std::uint64_t seed,
                                std::uint32_t stream) {
    if (n == 0) throw InvalidArgument("sample_initial: n must be positive");
    const std::size_t d = init.dim();
    std::vector<double> coords(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        init.draw(seed, stream, static_cast<std::uint32_t>(i), n,
                  std::span<double>(coords.data() + i * d, d));
    }
    return EmpiricalMeasure::uniform(d, std::move(coords));
}

namespace detail {

namespace {

std::string describe_failure(const char* what, double t, std::span<const double> x,
                             std::size_t path) {
    std::ostringstream os;
    os.precision(17);
    os << what << " at t=" << t << ", path " << path << ", x=(";
    for (std::size_t j = 0; j < x.size(); ++j) os << (j ? "," : "") << x[j];
    os << ")";
    return os.str();
}

}  // namespace

std::shared_ptr<const std::vector<double>> simulate(
    const CoefficientSet& coeffs, const MeasureFlow* frozen_flow, MeasureSource source,
    const InitialSampler& init, std::span<const double> start, const TimeGrid& grid,
    std::size_t first_step, std::size_t last_step, std::size_t n_paths, std::uint64_t seed,
    std::uint32_t stream) {
    const std::size_t d = coeffs.dim_state;
    const std::size_t m = coeffs.dim_noise;
    if (n_paths == 0) throw InvalidArgument("simulate: n_paths must be positive");
    if (n_paths > 0xFFFFFFFFu) throw InvalidArgument("simulate: too many paths");
    if (!coeffs.drift || !coeffs.diffusion) throw InvalidArgument("simulate: incomplete coefficients");
    if (d == 0 || m == 0) throw InvalidArgument("simulate: zero state or noise dimension");
    if (start.empty() && init.dim() != d) {
        throw InvalidArgument("simulate: initial law dimension differs from the state dimension");
    }
    if (!start.empty() && start.size() != n_paths * d) {
        throw InvalidArgument("simulate: start positions must be N x d");
    }
    if (last_step > grid.n_steps() || first_step > last_step) {
        throw InvalidArgument("simulate: step range outside the grid");
    }
    if (source == MeasureSource::frozen_flow) {
        if (frozen_flow == nullptr) throw InvalidArgument("simulate: missing frozen flow");
        if (frozen_flow->dim() != d) throw InvalidArgument("simulate: flow dimension mismatch");
    }

    const std::size_t n_slots = last_step - first_step + 1;
    auto values = std::make_shared<std::vector<double>>(n_slots * n_paths * d);
    const std::shared_ptr<const std::vector<double>> readonly = values;
    std::vector<double>& xs = *values;

    if (!start.empty()) {
        std::copy(start.begin(), start.end(), xs.begin());
    } else {
        for (std::size_t i = 0; i < n_paths; ++i) {
            init.draw(seed, stream, static_cast<std::uint32_t>(i), n_paths,
                      std::span<double>(xs.data() + i * d, d));
        }
    }

    const double h = grid.step();
    const double sqrt_h = std::sqrt(h);
    for (std::size_t k = first_step; k < last_step; ++k) {
        const double t = grid.time(k);
        const std::size_t slot = k - first_step;
        const double* current = xs.data() + slot * n_paths * d;
        double* next = xs.data() + (slot + 1) * n_paths * d;

        DriftField field;
        if (source == MeasureSource::frozen_flow) {
            field = coeffs.drift(t, frozen_flow->at_time(t));
        } else {
            const auto here = EmpiricalMeasure::uniform_view(d, readonly, slot * n_paths, n_paths);
            field = coeffs.drift(t, here);
        }

        std::vector<char> failed(n_paths, 0);
        bool any_failure = false;
#pragma omp parallel
        {
            std::vector<double> b(d), sigma(d * m), dw(m);
#pragma omp for schedule(static) reduction(|| : any_failure)
            for (std::ptrdiff_t ip = 0; ip < static_cast<std::ptrdiff_t>(n_paths); ++ip) {
                const auto i = static_cast<std::size_t>(ip);
                const std::span<const double> x(current + i * d, d);
                field(x, b);
                coeffs.diffusion(t, x, sigma);
                const Substream rng(seed, stream, static_cast<std::uint32_t>(i), DrawPurpose::increment);
                for (std::size_t j = 0; j < m; ++j) {
                    dw[j] = sqrt_h * rng.normal(static_cast<std::uint64_t>(k) * m + j);
                }
                bool ok = true;
                for (std::size_t r = 0; r < d; ++r) {
                    double v = x[r] + b[r] * h;
                    for (std::size_t j = 0; j < m; ++j) v += sigma[r * m + j] * dw[j];
                    next[i * d + r] = v;
                    ok = ok && std::isfinite(b[r]) && std::isfinite(v);
                }
                for (double s : sigma) ok = ok && std::isfinite(s);
                if (!ok) {
                    failed[i] = 1;
                    any_failure = true;
                }
            }
        }
        if (any_failure) {
            const auto i = static_cast<std::size_t>(
                std::distance(failed.begin(), std::find(failed.begin(), failed.end(), 1)));
            throw SimulationError(describe_failure("non-finite drift, diffusion or state", t,
                                                   std::span<const double>(current + i * d, d), i));
        }
    }
    return readonly;
}

}  // namespace detail

PathEnsemble euler_maruyama(const CoefficientSet& coeffs, const MeasureFlow& frozen_flow,
                            const InitialSampler& init, const TimeGrid& grid, std::size_t n_paths,
                            std::uint64_t seed, std::uint32_t stream) {
    auto values = detail::simulate(coeffs, &frozen_flow, detail::MeasureSource::frozen_flow, init,
                                   {}, grid, 0, grid.n_steps(), n_paths, seed, stream);
    return PathEnsemble(grid, n_paths, coeffs.dim_state, std::move(values), seed, stream);
}

MeasureFlow ensemble_flow(const PathEnsemble& ensemble) {
    std::vector<EmpiricalMeasure> measures;
    measures.reserve(ensemble.grid().n_steps() + 1);
    for (std::size_t k = 0; k <= ensemble.grid().n_steps(); ++k) {
        measures.push_back(ensemble.marginal(k));
    }
    return MeasureFlow(ensemble.grid().times(), std::move(measures));
}

}  // namespace mvflow
