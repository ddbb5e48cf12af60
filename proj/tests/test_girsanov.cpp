#include "doctest.h"

#include <cmath>

#include "mvflow/coefficients.hpp"
#include "mvflow/error.hpp"
#include "mvflow/girsanov.hpp"

using namespace mvflow;

namespace {

MeasureFlow dirac_flow(const TimeGrid& grid, std::vector<double> x) {
    return MeasureFlow::constant(grid.times(), EmpiricalMeasure::dirac(std::move(x)));
}

// mean-field OU drift: b(x, delta_m) - b(x, delta_0) = m, a constant difference
CoefficientSet ou(double sigma, std::size_t dim = 1) {
    return make_preset("conv_ou", {{"sigma", sigma}, {"dim", static_cast<double>(dim)}});
}

}  // namespace

TEST_CASE("identical flows give zero integrals") {
    const TimeGrid grid(1.0, 50);
    const auto c = ou(1.0);
    const auto flow = dirac_flow(grid, {0.4});
    const auto ens = euler_maruyama(c, flow, InitialSampler::isotropic_gaussian({0.0}, 1.0), grid, 100, 1);
    for (double v : xi_squared_integral(c, flow, flow, ens)) CHECK(v == 0.0);
    CHECK(kl_bound(xi_squared_integral(c, flow, flow, ens)).mean == 0.0);
}

TEST_CASE("constant drift difference") {
    const TimeGrid grid(0.5, 500);
    const auto c = ou(1.0);
    const auto mu = dirac_flow(grid, {1.0});
    const auto nu = dirac_flow(grid, {0.0});
    const auto ens = euler_maruyama(c, nu, InitialSampler::dirac({0.0}), grid, 1000, 2);
    const auto xi = xi_squared_integral(c, mu, nu, ens);
    for (double v : xi) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    const auto kl = kl_bound(xi, 0.5);
    CHECK(kl.mean == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(kl.std_error < 1e-15);
    CHECK(pinsker_tv_bound(kl) == doctest::Approx(std::sqrt(0.125)).epsilon(1e-12));

    // doubling the difference quadruples the estimate
    const auto xi2 = xi_squared_integral(c, dirac_flow(grid, {2.0}), nu, ens);
    CHECK(kl_bound(xi2).mean == doctest::Approx(4.0 * kl.mean).epsilon(1e-12));

    // partial horizon
    const auto half = xi_squared_integral(c, mu, nu, ens, 250);
    CHECK(half[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("scaled diffusion and several dimensions") {
    const TimeGrid grid(1.0, 100);
    // sigma = 2 I: |xi|^2 = |delta|^2 / 4
    const auto c = ou(2.0, 2);
    const auto mu = dirac_flow(grid, {1.0, 2.0});
    const auto nu = dirac_flow(grid, {0.0, 0.0});
    const auto ens = euler_maruyama(c, nu, InitialSampler::dirac({0.0, 0.0}), grid, 50, 3);
    for (double v : xi_squared_integral(c, mu, nu, ens)) CHECK(v == doctest::Approx(5.0 / 4.0).epsilon(1e-12));

    // general sigma with m > d: xi^2 = delta^T (sigma sigma^T)^-1 delta
    auto wide = ou(1.0, 2);
    wide.dim_noise = 3;
    wide.diffusion = constant_diffusion({1.0, 0.0, 1.0, 0.0, 2.0, 0.0}, 3);
    const auto ens2 = euler_maruyama(wide, nu, InitialSampler::dirac({0.0, 0.0}), grid, 10, 4);
    // sigma sigma^T = diag(2, 4); delta = (1, 2) -> 1/2 + 1 = 3/2
    for (double v : xi_squared_integral(wide, mu, nu, ens2)) CHECK(v == doctest::Approx(1.5).epsilon(1e-12));

    auto singular = ou(1.0, 2);
    singular.diffusion = constant_diffusion({1.0, 0.0, 0.0, 0.0}, 2);
    const auto ens3 = euler_maruyama(singular, nu, InitialSampler::dirac({0.0, 0.0}), grid, 10, 4);
    CHECK_THROWS_AS(xi_squared_integral(singular, mu, nu, ens3), SimulationError);
}

TEST_CASE("kl and pinsker arithmetic") {
    const std::vector<double> zeros(10, 0.0);
    CHECK(kl_bound(zeros).mean == 0.0);
    CHECK(pinsker_tv_bound({0.25, 0.0, 1, 0.0}) == doctest::Approx(0.3535533905932738));
    CHECK(pinsker_tv_bound({2.0, 0.0, 1, 0.0}) == 1.0);
    CHECK(pinsker_tv_bound({-1e-3, 0.0, 1, 0.0}) == 0.0);
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto kl = kl_bound(v);
    CHECK(kl.mean == 1.25);
    // sample sd of {1,2,3,4} is sqrt(5/3)
    CHECK(kl.std_error == doctest::Approx(0.5 * std::sqrt(5.0 / 3.0) / 2.0));
    CHECK_THROWS_AS(kl_bound(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("quadrature refinement halves the error") {
    // flows delta_t vs delta_0: xi = t, integral over [0,1] is 1/3
    auto integral = [](std::size_t n) {
        const TimeGrid grid(1.0, n);
        std::vector<EmpiricalMeasure> ms;
        for (double t : grid.times()) ms.push_back(EmpiricalMeasure::dirac({t}));
        const MeasureFlow mu(grid.times(), ms);
        const auto nu = MeasureFlow::constant(grid.times(), EmpiricalMeasure::dirac({0.0}));
        const auto c = ou(1.0);
        const auto ens = euler_maruyama(c, nu, InitialSampler::isotropic_gaussian({0.0}, 1.0), grid, 20, 1);
        return xi_squared_integral(c, mu, nu, ens)[7];
    };
    const double a = integral(50), b = integral(100), c = integral(200);
    const double ratio = (c - b) / (b - a);
    CHECK(ratio >= 0.3);
    CHECK(ratio <= 0.7);
    CHECK(c == doctest::Approx(1.0 / 3.0).epsilon(0.01));
}

TEST_CASE("contraction report") {
    const TimeGrid grid(1.0, 50);
    const auto c = make_preset("conv_tanh", {{"bound", 0.5}});
    const auto init = InitialSampler::isotropic_gaussian({0.0}, 1.0);
    const auto same = dirac_flow(grid, {0.0});
    const auto r0 = contraction_check_ert1(c, init, same, same, grid, 2000, 1);
    for (std::size_t k = 0; k <= 50; ++k) {
        CHECK(r0.lhs_tv[k] == 0.0);
        CHECK(r0.rhs_quadrature[k] == 0.0);
        CHECK(r0.kl_mean[k] == 0.0);
    }
    CHECK(r0.ert1_holds());

    // two-atom flows with constant TV v = 0.5
    const auto a = MeasureFlow::constant(grid.times(), EmpiricalMeasure(1, {-1.0, 1.0}, {0.75, 0.25}));
    const auto b = MeasureFlow::constant(grid.times(), EmpiricalMeasure(1, {-1.0, 1.0}, {0.25, 0.75}));
    const auto r = contraction_check_ert1(c, init, a, b, grid, 20000, 2);
    CHECK(r.input_tv[10] == doctest::Approx(0.5));
    // (K1 K3^2 / 4) v^2 t with K1 = K3 = 1
    CHECK(r.rhs_quadrature[50] == doctest::Approx(0.25 * 0.25 * 1.0).epsilon(1e-12));
    CHECK(r.ert1_holds());
    CHECK(r.pinsker_holds());
    CHECK(r.lhs_tv[50] > 0.0);
    CHECK(r.kl_se[50] > 0.0);
}
