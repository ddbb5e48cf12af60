#include "mvflow/particle_system.hpp"

namespace mvflow {

PathEnsemble simulate_particles(const CoefficientSet& coeffs, const InitialSampler& init, const TimeGrid& grid,
                                std::size_t n_particles, std::uint64_t seed, std::uint32_t stream) {
    auto values = detail::simulate(coeffs, nullptr, detail::MeasureSource::ensemble, init, {}, grid, 0,
                                   grid.n_steps(), n_particles, seed, stream);
    return PathEnsemble(grid, n_particles, coeffs.dim_state, std::move(values), seed, stream);
}

}  // namespace mvflow
