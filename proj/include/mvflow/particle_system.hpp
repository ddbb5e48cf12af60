#pragma once

#include <cstddef>
#include <cstdint>

#include "mvflow/sde_solver.hpp"

namespace mvflow {

/// N-particle mean-field system: at step k every particle's drift sees the
/// uniform empirical measure of all N particles at step k (itself included).
/// Noise follows the euler_maruyama substream convention, so a drift that
/// ignores its measure gives bitwise the same paths.
PathEnsemble simulate_particles(const CoefficientSet& coeffs, const InitialSampler& init, const TimeGrid& grid,
                                std::size_t n_particles, std::uint64_t seed, std::uint32_t stream = kCrnStream);

}  // namespace mvflow
