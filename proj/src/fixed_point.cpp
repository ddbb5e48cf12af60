#include "mvflow/fixed_point.hpp"

#include <algorithm>
#include <cmath>

#include "mvflow/error.hpp"

namespace mvflow {

FlowMetric FlowMetric::parse(const std::string& name, double theta) {
    if (name == "rho") return rho();
    if (name == "rho_tilde") {
        if (!(theta >= 1.0)) throw InvalidArgument("rho_tilde needs theta >= 1");
        return rho_tilde(theta);
    }
    throw InvalidArgument("unknown flow metric '" + name + "' (expected rho or rho_tilde)");
}

std::string FlowMetric::name() const { return kind == Kind::rho ? "rho" : "rho_tilde"; }

double FlowMetric::at(const EmpiricalMeasure& a, const EmpiricalMeasure& b) const {
    const double tv = tv_distance(a, b, binning);
    if (kind == Kind::rho) return tv;
    return tv + wasserstein(theta, a, b, transport);
}

double FlowMetric::over(const MeasureFlow& a, const MeasureFlow& b, std::size_t first, std::size_t last) const {
    if (!a.same_grid(b)) throw InvalidArgument("flow metric: time grids differ");
    if (first > last || last >= a.size()) throw InvalidArgument("flow metric: index range outside the grid");
    std::vector<double> values(last - first + 1, 0.0);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(values.size()); ++k) {
        const std::size_t idx = first + static_cast<std::size_t>(k);
        values[static_cast<std::size_t>(k)] = at(a[idx], b[idx]);
    }
    return *std::max_element(values.begin(), values.end());
}

double window_horizon(double K1, double K3, double T) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("window_horizon: T must be positive");
    if (!(K1 >= 1.0) || !(K3 >= 1.0)) throw InvalidArgument("window_horizon: K1 and K3 must be >= 1");
    return std::min(T, 1.0 / (K1 * K3 * K3));
}

MeasureFlow phi_map(const CoefficientSet& coeffs, const InitialSampler& init, const MeasureFlow& flow,
                    const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed, std::uint32_t stream) {
    return ensemble_flow(euler_maruyama(coeffs, flow, init, grid, n_paths, seed, stream));
}

std::vector<double> PicardDiagnostics::distances() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.distance);
    return out;
}

PicardResult picard_iterate(const CoefficientSet& coeffs, const InitialSampler& init, const TimeGrid& grid,
                            const PicardOptions& options) {
    if (!(options.tol > 0.0)) throw InvalidArgument("picard_iterate: tol must be positive");
    if (options.max_iter == 0) throw InvalidArgument("picard_iterate: max_iter must be >= 1");
    if (options.n_paths == 0) throw InvalidArgument("picard_iterate: n_paths must be >= 1");
    if (init.dim() != coeffs.dim_state) {
        throw InvalidArgument("picard_iterate: initial law dimension differs from the state dimension");
    }

    const std::size_t n = grid.n_steps();
    const std::size_t N = options.n_paths;
    const std::size_t d = coeffs.dim_state;
    const std::vector<double> times = grid.times();

    std::size_t steps_per_window = n;
    if (options.windowed) {
        if (!std::isfinite(coeffs.constants.K3)) {
            throw InvalidArgument("picard_iterate: windowing needs a finite K3");
        }
        const double t0 = window_horizon(coeffs.constants.K1, coeffs.constants.K3, grid.t_end());
        steps_per_window = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::floor(t0 / grid.step() + 1e-9)), 1, n);
    }

    PicardDiagnostics diag;
    diag.metric = options.metric.name();

    // Measures accepted so far, one per grid index.
    std::vector<EmpiricalMeasure> accepted;
    accepted.reserve(n + 1);

    const auto initial_law = sample_initial(init, N, options.seed, kCrnStream);
    accepted.push_back(initial_law);

    const auto assemble = [&](std::size_t first, const std::vector<EmpiricalMeasure>& window_part) {
        std::vector<EmpiricalMeasure> all(accepted.begin(), accepted.begin() + static_cast<std::ptrdiff_t>(first));
        all.insert(all.end(), window_part.begin(), window_part.end());
        while (all.size() < n + 1) all.push_back(window_part.back());
        return MeasureFlow(times, std::move(all));
    };

    for (std::size_t first = 0, window = 0; first < n; first += steps_per_window, ++window) {
        const std::size_t last = std::min(first + steps_per_window, n);
        diag.windows.emplace_back(times[first], times[last]);

        // Initial guess: constant in time at the law reached at the window start.
        const EmpiricalMeasure start_law = accepted[first];
        std::vector<EmpiricalMeasure> current(last - first + 1, start_law);
        MeasureFlow previous = assemble(first, current);
        std::span<const double> start;
        if (first > 0) start = start_law.coordinates();

        bool converged = false;
        for (std::size_t it = 1; it <= options.max_iter; ++it) {
            const auto storage = detail::simulate(coeffs, &previous, detail::MeasureSource::frozen_flow, init, start,
                                                  grid, first, last, N, options.seed, kCrnStream);
            std::vector<EmpiricalMeasure> next;
            next.reserve(last - first + 1);
            for (std::size_t k = first; k <= last; ++k) {
                next.push_back(EmpiricalMeasure::uniform_view(d, storage, (k - first) * N, N));
            }
            MeasureFlow candidate = assemble(first, next);
            const double dist = options.metric.over(candidate, previous, first, last);
            diag.records.push_back({it, dist, window});
            ++diag.iterations_used;
            previous = std::move(candidate);
            current = std::move(next);
            if (dist <= options.tol) {
                converged = true;
                break;
            }
        }
        diag.window_converged.push_back(converged);
        accepted.erase(accepted.begin() + static_cast<std::ptrdiff_t>(first), accepted.end());
        accepted.insert(accepted.end(), current.begin(), current.end());
    }

    diag.converged = std::all_of(diag.window_converged.begin(), diag.window_converged.end(),
                                 [](bool c) { return c; });
    return {MeasureFlow(times, std::move(accepted)), std::move(diag)};
}

MvSolution solve_mvsde(const CoefficientSet& coeffs, const InitialSampler& init, const TimeGrid& grid,
                       const PicardOptions& options) {
    auto picard = picard_iterate(coeffs, init, grid, options);
    auto paths = euler_maruyama(coeffs, picard.flow, init, grid, options.n_paths, options.seed, kFreshStream);
    return {std::move(paths), std::move(picard.flow), std::move(picard.diagnostics)};
}

}  // namespace mvflow
