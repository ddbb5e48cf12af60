// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "mvflow/coefficients.hpp"
#include "mvflow/experiments.hpp"
#include "mvflow/fixed_point.hpp"
#include "mvflow/girsanov.hpp"
#include "mvflow/measures.hpp"

using namespace mvflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

double phi(double x) { return boost::math::cdf(boost::math::normal_distribution<double>(), x); }

// Exhaustive minimum-cost assignment over all permutations.
double brute_force_wasserstein(double theta, const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<std::size_t> perm(y.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
        double cost = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) cost += std::pow(std::abs(x[i] - y[perm[i]]), theta);
        best = std::min(best, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::pow(best / static_cast<double>(x.size()), 1.0 / theta);
}

Outcome metric_oracle() {
    std::mt19937_64 gen(20240601);
    std::uniform_int_distribution<int> size(1, 6);
    std::normal_distribution<double> z(0.0, 2.0);
    double worst = 0.0;
    for (int instance = 0; instance < 200; ++instance) {
        const auto n = static_cast<std::size_t>(size(gen));
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = z(gen);
        for (auto& v : y) v = z(gen);
        for (double theta : {1.0, 2.0}) {
            const double w = wasserstein(theta, EmpiricalMeasure::uniform(1, x), EmpiricalMeasure::uniform(1, y));
            worst = std::max(worst, std::abs(w - brute_force_wasserstein(theta, x, y)));
        }
    }
    return {worst <= 1e-12, "max |W - exhaustive| = " + fmt("%.3g", worst) + " over 400 comparisons"};
}

Outcome tv_calibration() {
    const std::size_t n = 100000;
    const auto a = sample_initial(InitialSampler::isotropic_gaussian({0.0}, 1.0), n, 1, 0);
    const auto b = sample_initial(InitialSampler::isotropic_gaussian({1.0}, 1.0), n, 2, 0);
    const auto c = sample_initial(InitialSampler::isotropic_gaussian({0.2}, 1.0), n, 3, 0);
    const double exact1 = 2.0 * phi(0.5) - 1.0, exact2 = 2.0 * phi(0.1) - 1.0;
    const double tv1 = tv_distance(a, b), tv2 = tv_distance(a, c);
    const bool ok = std::abs(tv1 - exact1) <= 0.02 && std::abs(tv2 - exact2) <= 0.02;
    return {ok, "TV " + fmt("%.4f", tv1) + " vs " + fmt("%.4f", exact1) + ", " + fmt("%.4f", tv2) + " vs " +
                    fmt("%.4f", exact2)};
}

Outcome ou_benchmark() {
    const std::size_t n = 100000;
    const TimeGrid grid(1.0, 1000);
    PicardOptions o;
    o.metric = FlowMetric::rho_tilde(1.0);
    o.tol = 0.02;
    o.n_paths = n;
    o.seed = 2024;
    const auto r = picard_iterate(make_preset("conv_ou", {}), InitialSampler::isotropic_gaussian({0.0}, 1.0), grid, o);
    // with common noise the empirical mean is X0-bar + W-bar(t): SE^2 = (1 + t) / n
    double worst_z = 0.0;
    for (std::size_t k = 0; k <= grid.n_steps(); ++k) {
        worst_z = std::max(worst_z, std::abs(r.flow[k].mean()) / std::sqrt((1.0 + grid.time(k)) / n));
    }
    const auto& last = r.flow[grid.n_steps()];
    const double m = last.mean();
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (last.point(i)[0] - m) * (last.point(i)[0] - m);
    var /= static_cast<double>(n - 1);
    const double exact = 0.5 * (1.0 + std::exp(-2.0));
    const double rel = std::abs(var - exact) / exact;
    const bool ok = r.diagnostics.converged && worst_z <= 3.0 && rel <= 0.02;
    return {ok, std::string(r.diagnostics.converged ? "converged" : "NOT converged") + " in " +
                    std::to_string(r.diagnostics.iterations_used) + " iterations, max |mean|/SE " +
                    fmt("%.2f", worst_z) + ", Var(1) " + fmt("%.4f", var) + " vs " + fmt("%.4f", exact)};
}

Outcome one_iteration_exactness() {
    auto c = make_preset("conv_ou", {});
    c.drift = [](double t, const EmpiricalMeasure&) -> DriftField {
        return [t](std::span<const double> x, std::span<double> out) { out[0] = std::sin(x[0]) - t * x[0]; };
    };
    c.measure_independent = true;
    const TimeGrid grid(1.0, 100);
    const auto init = InitialSampler::isotropic_gaussian({0.5}, 1.0);
    const auto start = MeasureFlow::constant(grid.times(), sample_initial(init, 5000, 17));
    const auto first = phi_map(c, init, start, grid, 5000, 17);
    const auto second = phi_map(c, init, first, grid, 5000, 17);
    PicardOptions o;
    o.n_paths = 5000;
    o.seed = 17;
    const auto r = picard_iterate(c, init, grid, o);
    const bool ok = second.identical_to(first) && r.diagnostics.records.size() == 2 &&
                    r.diagnostics.records[1].distance == 0.0 && r.flow.identical_to(first);
    return {ok, "iterate 2 " + std::string(second.identical_to(first) ? "==" : "!=") +
                    " iterate 1 bitwise; Picard distance at iteration 2 = " +
                    fmt("%.3g", r.diagnostics.records.size() > 1 ? r.diagnostics.records[1].distance : NAN)};
}

Outcome girsanov_closed_form() {
    const auto c = make_preset("conv_ou", {});
    const TimeGrid grid(0.5, 500);
    const auto mu = MeasureFlow::constant(grid.times(), EmpiricalMeasure::dirac({1.0}));
    const auto nu = MeasureFlow::constant(grid.times(), EmpiricalMeasure::dirac({0.0}));
    const auto init = InitialSampler::dirac({0.0});
    const std::size_t n = 100000;
    const auto ens_mu = euler_maruyama(c, mu, init, grid, n, 5);
    const auto ens_nu = euler_maruyama(c, nu, init, grid, n, 5);
    const auto kl = kl_bound(xi_squared_integral(c, mu, nu, ens_nu), 0.5);
    const double bound = pinsker_tv_bound(kl);
    const double upper = pinsker_tv_upper(kl, 3.0);
    const double tv = tv_distance(ens_mu.marginal(500), ens_nu.marginal(500));
    const bool ok = std::abs(kl.mean - 0.25) <= 1e-14 && std::abs(bound - std::sqrt(0.125)) <= 1e-14 &&
                    tv <= upper + 0.02;
    return {ok, "KL " + fmt("%.17g", kl.mean) + ", Pinsker " + fmt("%.9f", bound) + ", empirical TV " +
                    fmt("%.4f", tv) + " <= " + fmt("%.4f", upper + 0.02)};
}

Outcome contraction_ert1() {
    const auto c = make_preset("conv_tanh", {{"bound", 0.5}});
    const double T = window_horizon(c.constants.K1, c.constants.K3, 1.0);
    const TimeGrid grid(T, 100);
    const auto init = InitialSampler::isotropic_gaussian({0.0}, 1.0);
    double worst = -INFINITY;
    std::size_t held = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        FlowSpec a, b;
        switch (seed % 3) {
            case 0:
                a.kind = b.kind = "two_atom";
                a.left = b.left = -1.0 - u(gen);
                a.right = b.right = 1.0 + u(gen);
                a.p0 = u(gen), a.p1 = u(gen), b.p0 = u(gen), b.p1 = u(gen);
                break;
            case 1:
                a.kind = b.kind = "gaussian";
                a.atoms = b.atoms = 32;
                a.mean = u(gen) - 0.5, b.mean = u(gen) - 0.5;
                a.velocity = u(gen) - 0.5;
                break;
            default:
                a.kind = b.kind = "dirac";
                a.location = 2.0 * u(gen) - 1.0, b.location = 2.0 * u(gen) - 1.0;
                b.velocity = u(gen);
        }
        const auto r = contraction_check_ert1(c, init, a.build(grid, 1), b.build(grid, 1), grid, 20000, seed, 0.01);
        worst = std::max(worst, r.max_excess());
        held += r.ert1_holds() ? 1 : 0;
    }
    return {held == 20 && c.constants.K3 == 1.0 && c.constants.K1 == 1.0,
            std::to_string(held) + "/20 flow pairs hold, t0 = " + fmt("%.3g", T) +
                ", max (LHS^2 - RHS) = " + fmt("%.4g", worst) + " vs allowance 0.01"};
}

Outcome stability_b1() {
    std::size_t held = 0;
    double worst = -INFINITY;
    for (int seed : {1, 2, 3}) {
        const auto cfg = parse_config_text(
            "coefficients.preset = moment\ncoefficients.coupling = 0.5\ninit_b.mean = 0.2\n"
            "grid.n_steps = 100\nn_paths = 100000\nallowance = 0.01\nseed = " +
            std::to_string(seed) + "\n");
        const auto r = run_stability(cfg);
        const auto& b1 = r.checks.front();
        worst = std::max(worst, b1.value);
        held += (b1.passed() && !b1.informational) ? 1 : 0;
    }
    return {held == 3, std::to_string(held) + "/3 seeds inside the envelope, max (TV^2 - envelope) = " +
                           fmt("%.4g", worst) + " vs allowance 0.01"};
}

Outcome chaos_ladder() {
    const auto cfg = parse_config_text(
        "coefficients.preset = conv_ou\ngrid.n_steps = 100\nchaos.particles = 100, 1000, 10000\n"
        "chaos.oracle_paths = 100000\nseed = 12\n");
    const auto r = run_chaos(cfg);
    const auto d = r.summary["discrepancy"].get<std::vector<double>>();
    std::string seq;
    for (double v : d) seq += (seq.empty() ? "" : ", ") + fmt("%.4f", v);
    const auto& inv = r.checks.front();
    return {inv.passed(), "rho_tilde discrepancies " + seq + " (" + std::to_string(static_cast<int>(inv.value)) +
                              " inversions, at most 1 allowed)"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
    std::vector<fs::path> left, right;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) left.push_back(fs::relative(e.path(), a));
    }
    for (const auto& e : fs::recursive_directory_iterator(b)) {
        if (e.is_regular_file()) right.push_back(fs::relative(e.path(), b));
    }
    std::sort(left.begin(), left.end());
    std::sort(right.begin(), right.end());
    if (left != right || left.empty()) return false;
    files += left.size();
    for (const auto& rel : left) {
        if (slurp(a / rel) != slurp(b / rel)) return false;
    }
    return true;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "mvflow_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"stability", "coefficients.preset = feedback\ncoefficients.gain_w = 0\ninit_b.mean = 0.3\n"
                      "grid.n_steps = 20\nn_paths = 3000\nexport.flow = true\n"},
        {"contraction", "coefficients.preset = conv_tanh\nflow_a.kind = gaussian\nflow_a.atoms = 16\n"
                        "flow_b.kind = two_atom\ngrid.n_steps = 20\nn_paths = 3000\n"},
        {"picard", "coefficients.preset = conv_tanh\ngrid.n_steps = 20\nn_paths = 1500\nwindowed = true\n"
                   "export.paths = true\n"},
        {"chaos", "coefficients.preset = moment\ngrid.n_steps = 20\nchaos.particles = 50, 500\n"
                  "chaos.oracle_paths = 5000\n"},
        {"distances", "init.mean = 0, 0\ninit_b.mean = 0.5, 0\nn_paths = 300\ntheta = 2\n"},
        {"validate", "coefficients.preset = conv_tanh\nprobes = 300\n"},
    };
    std::size_t identical = 0, files = 0;
    std::string failures;
    for (const auto& [kind, text] : runs) {
        const auto cfg_path = root / (kind + ".cfg");
        std::ofstream(cfg_path) << "kind = " << kind << "\n" << text;
        bool ok = true;
        for (const auto& [threads, suffix] : {std::pair{"1", "_t1"}, std::pair{"3", "_t3"}, std::pair{"1", "_t1_again"}}) {
            const auto out = root / (kind + suffix);
            const std::string cmd = std::string("MVFLOW_THREADS=") + threads + " '" + MVFLOW_CLI_PATH + "' " + kind +
                                    " --config '" + cfg_path.string() + "' --seed 77 --out-dir '" + out.string() +
                                    "' > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) == 1) ok = false;
        }
        ok = ok && same_tree(root / (kind + "_t1"), root / (kind + "_t3"), files) &&
             same_tree(root / (kind + "_t1"), root / (kind + "_t1_again"), files);
        identical += ok ? 1 : 0;
        if (!ok) failures += " " + kind;
    }
    fs::remove_all(root);
    return {identical == runs.size(), std::to_string(identical) + "/" + std::to_string(runs.size()) +
                                          " subcommands byte-identical across 1 and 3 threads and reruns (" +
                                          std::to_string(files) + " file comparisons)" +
                                          (failures.empty() ? "" : "; differing:" + failures)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "metric oracle equivalence", 5.0, metric_oracle},
        {2, "TV estimator calibration", 20.0, tv_calibration},
        {3, "OU mean-field benchmark", 120.0, ou_benchmark},
        {4, "one-iteration exactness", 10.0, one_iteration_exactness},
        {5, "Girsanov closed form", 60.0, girsanov_closed_form},
        {6, "contraction inequality", 300.0, contraction_ert1},
        {7, "stability envelope", 300.0, stability_b1},
        {8, "chaos cross-check", 600.0, chaos_ladder},
        {9, "determinism", 60.0, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool pass = o.pass && secs <= c.limit_s;
        failed += pass ? 0 : 1;
        std::printf("[%s] criterion %d, %s: %s; %.1f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.limit_s);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
