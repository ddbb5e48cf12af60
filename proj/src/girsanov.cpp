#include "mvflow/girsanov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "mvflow/error.hpp"
#include "mvflow/summation.hpp"

namespace mvflow {

namespace {

void check_inputs(const CoefficientSet& coeffs, const MeasureFlow& mu_flow, const MeasureFlow& nu_flow,
                  const PathEnsemble& ens) {
    if (ens.dim() != coeffs.dim_state) throw InvalidArgument("xi integral: ensemble dimension mismatch");
    if (mu_flow.dim() != coeffs.dim_state || nu_flow.dim() != coeffs.dim_state) {
        throw InvalidArgument("xi integral: flow dimension mismatch");
    }
}

/// Walks the grid and hands the running per-path integrals to `visit(k, sums)`
/// before step k is added, for k = 0..last_step.
template <class Visit>
void accumulate_xi(const CoefficientSet& coeffs, const MeasureFlow& mu_flow, const MeasureFlow& nu_flow,
                   const PathEnsemble& ens, std::size_t last_step, Visit&& visit) {
    check_inputs(coeffs, mu_flow, nu_flow, ens);
    const std::size_t N = ens.n_paths();
    const std::size_t d = coeffs.dim_state;
    const std::size_t m = coeffs.dim_noise;
    const TimeGrid& grid = ens.grid();
    const double h = grid.step();
    std::vector<double> sums(N, 0.0);

    for (std::size_t k = 0; k <= last_step; ++k) {
        visit(k, static_cast<const std::vector<double>&>(sums));
        if (k == last_step) break;
        const double t = grid.time(k);
        const auto& mu_t = mu_flow.at_time(t);
        const auto& nu_t = nu_flow.at_time(t);
        if (mu_t.identical_to(nu_t)) continue;  // the drifts agree exactly
        const DriftField b_mu = coeffs.drift(t, mu_t);
        const DriftField b_nu = coeffs.drift(t, nu_t);

        std::vector<char> failed(N, 0);
        bool any_failure = false;
#pragma omp parallel
        {
            std::vector<double> bm(d), bn(d), sigma(d * m);
            Eigen::VectorXd delta(static_cast<Eigen::Index>(d));
            Eigen::MatrixXd gram(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
            Eigen::LLT<Eigen::MatrixXd> llt(static_cast<Eigen::Index>(d));
#pragma omp for schedule(static) reduction(|| : any_failure)
            for (std::ptrdiff_t ip = 0; ip < static_cast<std::ptrdiff_t>(N); ++ip) {
                const auto i = static_cast<std::size_t>(ip);
                const auto x = ens.position(i, k);
                b_mu(x, bm);
                b_nu(x, bn);
                coeffs.diffusion(t, x, sigma);
                double xi2 = 0.0;
                if (d == 1 && m == 1) {
                    const double s2 = sigma[0] * sigma[0];
                    const double diff = bm[0] - bn[0];
                    xi2 = diff * diff / s2;
                    if (!(s2 > 0.0)) xi2 = NAN;
                } else {
                    for (std::size_t r = 0; r < d; ++r) {
                        delta[static_cast<Eigen::Index>(r)] = bm[r] - bn[r];
                        for (std::size_t c = 0; c <= r; ++c) {
                            double v = 0.0;
                            for (std::size_t j = 0; j < m; ++j) v += sigma[r * m + j] * sigma[c * m + j];
                            gram(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
                            gram(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = v;
                        }
                    }
                    // |xi|^2 = delta^T (sigma sigma^*)^-1 delta
                    llt.compute(gram);
                    if (llt.info() == Eigen::Success) xi2 = delta.dot(llt.solve(delta));
                    else xi2 = NAN;
                }
                if (std::isfinite(xi2)) {
                    sums[i] += xi2 * h;
                } else {
                    failed[i] = 1;
                    any_failure = true;
                }
            }
        }
        if (any_failure) {
            const auto i = static_cast<std::size_t>(
                std::distance(failed.begin(), std::find(failed.begin(), failed.end(), 1)));
            std::ostringstream os;
            os.precision(17);
            os << "xi integral: singular sigma sigma^* or non-finite drift difference at t=" << t << ", path " << i
               << ", x=(";
            const auto x = ens.position(i, k);
            for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << x[j];
            os << ")";
            throw SimulationError(os.str());
        }
    }
}

}  // namespace

std::vector<double> xi_squared_integral(const CoefficientSet& coeffs, const MeasureFlow& mu_flow,
                                        const MeasureFlow& nu_flow, const PathEnsemble& ens,
                                        std::size_t last_step) {
    if (last_step > ens.grid().n_steps()) throw InvalidArgument("xi integral: step beyond the grid");
    std::vector<double> out;
    accumulate_xi(coeffs, mu_flow, nu_flow, ens, last_step, [&](std::size_t k, const std::vector<double>& sums) {
        if (k == last_step) out = sums;
    });
    return out;
}

std::vector<double> xi_squared_integral(const CoefficientSet& coeffs, const MeasureFlow& mu_flow,
                                        const MeasureFlow& nu_flow, const PathEnsemble& ens) {
    return xi_squared_integral(coeffs, mu_flow, nu_flow, ens, ens.grid().n_steps());
}

std::vector<KlEstimate> kl_profile(const CoefficientSet& coeffs, const MeasureFlow& mu_flow,
                                   const MeasureFlow& nu_flow, const PathEnsemble& ens) {
    std::vector<KlEstimate> out;
    const std::size_t n = ens.grid().n_steps();
    out.reserve(n + 1);
    accumulate_xi(coeffs, mu_flow, nu_flow, ens, n, [&](std::size_t k, const std::vector<double>& sums) {
        out.push_back(kl_bound(sums, ens.grid().time(k)));
    });
    return out;
}

KlEstimate kl_bound(std::span<const double> integrals, double horizon) {
    if (integrals.empty()) throw InvalidArgument("kl_bound: no integrals");
    const auto n = static_cast<double>(integrals.size());
    const double mean = pairwise_sum(integrals) / n;
    std::vector<double> dev(integrals.size());
    for (std::size_t i = 0; i < integrals.size(); ++i) dev[i] = (integrals[i] - mean) * (integrals[i] - mean);
    const double var = integrals.size() > 1 ? pairwise_sum(dev) / (n - 1.0) : 0.0;
    return {0.5 * mean, 0.5 * std::sqrt(var / n), integrals.size(), horizon};
}

double pinsker_tv_bound(const KlEstimate& kl) { return std::sqrt(std::max(kl.mean, 0.0) / 2.0); }

double pinsker_tv_upper(const KlEstimate& kl, double z) {
    return std::sqrt(std::max(kl.mean + z * kl.std_error, 0.0) / 2.0);
}

double ContractionReport::max_excess() const {
    double worst = -INFINITY;
    for (std::size_t k = 0; k < lhs_tv.size(); ++k) {
        worst = std::max(worst, lhs_tv[k] * lhs_tv[k] - rhs_quadrature[k]);
    }
    return worst;
}

bool ContractionReport::pinsker_holds() const {
    for (std::size_t k = 0; k < lhs_tv.size(); ++k) {
        if (lhs_tv[k] > pinsker_upper[k] + pinsker_allowance) return false;
    }
    return true;
}

ContractionReport contraction_check_ert1(const CoefficientSet& coeffs, const InitialSampler& init,
                                         const MeasureFlow& mu_flow, const MeasureFlow& nu_flow,
                                         const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                         double allowance, double pinsker_allowance, const BinningRule& binning,
                                         double wasserstein_theta) {
    if (!std::isfinite(coeffs.constants.K3)) {
        throw InvalidArgument("contraction_check_ert1: the drift has no finite TV-Lipschitz constant");
    }
    const auto ens_mu = euler_maruyama(coeffs, mu_flow, init, grid, n_paths, seed, kCrnStream);
    const auto ens_nu = euler_maruyama(coeffs, nu_flow, init, grid, n_paths, seed, kCrnStream);
    const auto kl = kl_profile(coeffs, mu_flow, nu_flow, ens_nu);

    const std::size_t n = grid.n_steps();
    ContractionReport r;
    r.times = grid.times();
    r.K1 = coeffs.constants.K1;
    r.K3 = coeffs.constants.K3;
    r.allowance = allowance;
    r.pinsker_allowance = pinsker_allowance;
    r.n_paths = n_paths;
    r.seed = seed;
    r.lhs_tv.assign(n + 1, 0.0);
    r.input_tv.assign(n + 1, 0.0);
    const bool with_w = wasserstein_theta >= 1.0;
    if (with_w) {
        r.lhs_w.assign(n + 1, 0.0);
        r.input_w.assign(n + 1, 0.0);
    }

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t kp = 0; kp <= static_cast<std::ptrdiff_t>(n); ++kp) {
        const auto k = static_cast<std::size_t>(kp);
        r.lhs_tv[k] = tv_distance(ens_mu.marginal(k), ens_nu.marginal(k), binning);
        r.input_tv[k] = tv_distance(mu_flow.at_time(r.times[k]), nu_flow.at_time(r.times[k]), binning);
        if (with_w) {
            r.lhs_w[k] = wasserstein(wasserstein_theta, ens_mu.marginal(k), ens_nu.marginal(k));
            r.input_w[k] = wasserstein(wasserstein_theta, mu_flow.at_time(r.times[k]), nu_flow.at_time(r.times[k]));
        }
    }

    const double scale = r.K1 * r.K3 * r.K3 / 4.0;
    double integral = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        r.rhs_quadrature.push_back(scale * integral);
        r.kl_mean.push_back(kl[k].mean);
        r.kl_se.push_back(kl[k].std_error);
        r.pinsker_bound.push_back(pinsker_tv_bound(kl[k]));
        r.pinsker_upper.push_back(pinsker_tv_upper(kl[k]));
        if (k < n) integral += r.input_tv[k] * r.input_tv[k] * grid.step();
    }
    return r;
}

}  // namespace mvflow
