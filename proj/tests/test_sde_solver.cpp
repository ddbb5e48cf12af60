#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <omp.h>

#include "mvflow/error.hpp"
#include "mvflow/sde_solver.hpp"

using namespace mvflow;

namespace {

CoefficientSet constant_coefficients(double drift, double sigma) {
    CoefficientSet c;
    c.name = "constant";
    c.drift = [drift](double, const EmpiricalMeasure&) -> DriftField {
        return [drift](std::span<const double>, std::span<double> out) { out[0] = drift; };
    };
    c.diffusion = [sigma](double, std::span<const double>, std::span<double> out) { out[0] = sigma; };
    c.measure_independent = true;
    return c;
}

CoefficientSet linear_coefficients(double rate, double sigma) {
    CoefficientSet c;
    c.name = "ou";
    c.drift = [rate](double, const EmpiricalMeasure&) -> DriftField {
        return [rate](std::span<const double> x, std::span<double> out) { out[0] = -rate * x[0]; };
    };
    c.diffusion = [sigma](double, std::span<const double>, std::span<double> out) { out[0] = sigma; };
    c.measure_independent = true;
    return c;
}

MeasureFlow dirac_flow(const TimeGrid& grid, double x) {
    return MeasureFlow::constant(grid.times(), EmpiricalMeasure::dirac({x}));
}

}  // namespace

TEST_CASE("time grid") {
    const TimeGrid g(1.0, 3);
    CHECK(g.step() == doctest::Approx(1.0 / 3.0));
    CHECK(g.time(3) == 1.0);
    CHECK(g.times().size() == 4);
    CHECK_THROWS_AS(TimeGrid(0.0, 3), InvalidArgument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), InvalidArgument);
}

TEST_CASE("zero coefficients keep every path at its initial draw") {
    const TimeGrid grid(1.0, 20);
    const auto init = InitialSampler::isotropic_gaussian({0.0}, 1.0);
    const auto ens = euler_maruyama(constant_coefficients(0.0, 0.0), dirac_flow(grid, 0.0), init, grid, 50, 3);
    const auto x0 = sample_initial(init, 50, 3);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(ens.at(i, 0, 0) == x0.point(i)[0]);
        CHECK(ens.at(i, 20, 0) == ens.at(i, 0, 0));
    }
    const auto flow = ensemble_flow(ens);
    for (std::size_t k = 0; k < flow.size(); ++k) CHECK(flow[k].identical_to(flow[0]));
}

TEST_CASE("constant drift is integrated exactly") {
    for (std::size_t n : {1u, 7u, 1000u}) {
        const TimeGrid grid(0.75, n);
        const auto ens = euler_maruyama(constant_coefficients(1.0, 0.0), dirac_flow(grid, 0.0),
                                        InitialSampler::dirac({0.0}), grid, 4, 1);
        CHECK(ens.at(2, n, 0) == doctest::Approx(0.75).epsilon(1e-14));
    }
}

TEST_CASE("Brownian motion variance") {
    const TimeGrid grid(2.0, 16);
    const std::size_t n = 100000;
    const auto ens = euler_maruyama(constant_coefficients(0.0, 1.0), dirac_flow(grid, 0.0),
                                    InitialSampler::dirac({0.0}), grid, n, 99);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += ens.at(i, 16, 0);
        sq += ens.at(i, 16, 0) * ens.at(i, 16, 0);
    }
    const double mean = sum / n;
    const double var = (sq - n * mean * mean) / (n - 1);
    // standard error of the sample variance of N(0, T): T sqrt(2/(n-1))
    CHECK(std::abs(var - 2.0) < 3.0 * 2.0 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("ensemble flow marginals") {
    const TimeGrid grid(1.0, 10);
    const auto ens = euler_maruyama(constant_coefficients(0.0, 1.0), dirac_flow(grid, 0.0),
                                    InitialSampler::isotropic_gaussian({1.0}, 0.5), grid, 300, 8);
    const auto flow = ensemble_flow(ens);
    CHECK(flow.size() == 11);
    for (std::size_t k : {0u, 5u, 10u}) {
        double sq = 0.0;
        for (std::size_t i = 0; i < 300; ++i) sq += ens.at(i, k, 0) * ens.at(i, k, 0);
        CHECK(moment(flow[k], 2.0) == doctest::Approx(sq / 300.0).epsilon(1e-12));
        CHECK(flow[k].has_uniform_weights());
    }
    const auto single = euler_maruyama(constant_coefficients(0.0, 0.0), dirac_flow(grid, 0.0),
                                       InitialSampler::dirac({2.5}), grid, 1, 8);
    const auto sf = ensemble_flow(single);
    for (std::size_t k = 0; k < sf.size(); ++k) CHECK(sf[k].identical_to(EmpiricalMeasure::dirac({2.5})));
}

TEST_CASE("initial samplers") {
    const auto d = sample_initial(InitialSampler::dirac({1.0, -2.0}), 5, 1);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(d.point(i)[0] == 1.0);
        CHECK(d.point(i)[1] == -2.0);
    }
    const auto m = sample_initial(InitialSampler::mixture({{1.0, InitialSampler::dirac({1.0, -2.0})}}), 5, 1);
    CHECK(m.identical_to(d));

    const std::size_t n = 100000;
    const auto g = sample_initial(InitialSampler::gaussian({0.0, 0.0}, {1.0, 0.0, 0.0, 1.0}), n, 17);
    CHECK(std::abs(g.mean(0)) < 3.0 / std::sqrt(n));
    CHECK(std::abs(g.mean(1)) < 3.0 / std::sqrt(n));

    // correlated covariance
    const auto c = sample_initial(InitialSampler::gaussian({0.0, 0.0}, {2.0, 1.0, 1.0, 1.0}), n, 5);
    double cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) cov += c.point(i)[0] * c.point(i)[1];
    CHECK(cov / n == doctest::Approx(1.0).epsilon(0.03));

    CHECK_THROWS_AS(InitialSampler::gaussian({0.0}, {-1.0}), InvalidArgument);
    CHECK_THROWS_AS(InitialSampler::gaussian({0.0, 0.0}, {1.0, 0.5, 0.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(InitialSampler::mixture({{0.5, InitialSampler::dirac({0.0})}}), InvalidArgument);
    CHECK_THROWS_AS(sample_initial(InitialSampler::dirac({0.0}), 0, 1), InvalidArgument);

    // mixture proportions
    const auto mix = sample_initial(InitialSampler::mixture({{0.3, InitialSampler::dirac({0.0})},
                                                             {0.7, InitialSampler::dirac({1.0})}}),
                                    n, 2);
    CHECK(std::abs(mix.mean() - 0.7) < 3.0 * std::sqrt(0.21 / n));

    // systematic empirical sampler maps path i to atom i
    const auto atoms = EmpiricalMeasure::uniform(1, {4.0, 5.0, 6.0});
    const auto sys = sample_initial(InitialSampler::empirical(atoms, true), 3, 1);
    CHECK(sys.identical_to(atoms));
}

TEST_CASE("reproducible and independent of the thread count") {
    const TimeGrid grid(1.0, 50);
    const auto coeffs = linear_coefficients(1.0, 0.7);
    const auto init = InitialSampler::isotropic_gaussian({0.0}, 1.0);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto a = euler_maruyama(coeffs, dirac_flow(grid, 0.0), init, grid, 2000, 12);
    omp_set_num_threads(4);
    const auto b = euler_maruyama(coeffs, dirac_flow(grid, 0.0), init, grid, 2000, 12);
    omp_set_num_threads(saved);
    CHECK(*a.storage() == *b.storage());
    const auto c = euler_maruyama(coeffs, dirac_flow(grid, 0.0), init, grid, 2000, 13);
    CHECK(*a.storage() != *c.storage());
    const auto fresh = euler_maruyama(coeffs, dirac_flow(grid, 0.0), init, grid, 2000, 12, 1);
    CHECK(*a.storage() != *fresh.storage());
    CHECK(a.path_stream_ids()[5] == 5);
    CHECK(fresh.path_stream_ids()[5] == ((std::uint64_t{1} << 32) | 5));
}

TEST_CASE("frozen flow is looked up from the left") {
    // drift equals the mean of the frozen measure
    CoefficientSet c = constant_coefficients(0.0, 0.0);
    c.drift = [](double, const EmpiricalMeasure& g) -> DriftField {
        const double m = g.mean();
        return [m](std::span<const double>, std::span<double> out) { out[0] = m; };
    };
    c.measure_independent = false;
    const TimeGrid grid(1.0, 4);
    // coarser flow: value 1 on [0, 0.5), value 3 from 0.5
    const MeasureFlow flow({0.0, 0.5}, {EmpiricalMeasure::dirac({1.0}), EmpiricalMeasure::dirac({3.0})});
    const auto ens = euler_maruyama(c, flow, InitialSampler::dirac({0.0}), grid, 1, 0);
    CHECK(ens.at(0, 4, 0) == doctest::Approx(0.25 * (1 + 1 + 3 + 3)));
}

TEST_CASE("non-finite drift aborts with location") {
    CoefficientSet c = constant_coefficients(0.0, 1.0);
    c.drift = [](double t, const EmpiricalMeasure&) -> DriftField {
        return [t](std::span<const double>, std::span<double> out) { out[0] = t > 0.35 ? NAN : 0.0; };
    };
    const TimeGrid grid(1.0, 10);
    try {
        euler_maruyama(c, dirac_flow(grid, 0.0), InitialSampler::dirac({0.0}), grid, 3, 1);
        FAIL("expected SimulationError");
    } catch (const SimulationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("t=0.4") != std::string::npos);
        CHECK(msg.find("path 0") != std::string::npos);
    }
}

TEST_CASE("strong error decreases at Euler order") {
    // dX = -X dt + 0.5 X dW (geometric), reference at h/16 on the same Brownian path
    CoefficientSet c;
    c.drift = [](double, const EmpiricalMeasure&) -> DriftField {
        return [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
    };
    c.diffusion = [](double, std::span<const double> x, std::span<double> out) { out[0] = 0.5 * x[0]; };
    c.measure_independent = true;
    const std::size_t n = 2000;
    const std::size_t fine = 1024;
    const TimeGrid fine_grid(1.0, fine);
    const auto ref = euler_maruyama(c, dirac_flow(fine_grid, 0.0), InitialSampler::dirac({1.0}), fine_grid, n, 4);

    // coarse paths driven by the summed fine increments
    std::vector<double> errors;
    for (std::size_t coarse : {16u, 32u, 64u}) {
        const std::size_t ratio = fine / coarse;
        const double h = 1.0 / coarse;
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Substream rng(4, kCrnStream, static_cast<std::uint32_t>(i), DrawPurpose::increment);
            double x = 1.0;
            for (std::size_t k = 0; k < coarse; ++k) {
                double dw = 0.0;
                for (std::size_t r = 0; r < ratio; ++r) dw += std::sqrt(1.0 / fine) * rng.normal(k * ratio + r);
                x += -x * h + 0.5 * x * dw;
            }
            err += std::abs(x - ref.at(i, fine, 0));
        }
        errors.push_back(err / n);
    }
    const double order = std::log2(errors[0] / errors[2]) / 2.0;
    CHECK(order >= 0.4);
}
