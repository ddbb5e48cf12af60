#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mvflow {

/// Weighted point cloud in R^d representing a probability law.
///
/// Immutable after construction. Coordinates live in shared storage so that
/// the marginals of a simulated ensemble can be viewed as measures without
/// copying; an empty weight vector means uniform weights 1/n.
class EmpiricalMeasure {
public:
    /// Weights must be nonnegative and sum to one within 1e-12.
    EmpiricalMeasure(std::size_t dim, std::vector<double> coordinates,
                     std::vector<double> weights);

    static EmpiricalMeasure uniform(std::size_t dim, std::vector<double> coordinates);
    static EmpiricalMeasure dirac(std::vector<double> point);

    /// Uniform-weight view of `count` consecutive points starting at point `first`.
    static EmpiricalMeasure uniform_view(std::size_t dim,
                                         std::shared_ptr<const std::vector<double>> storage,
                                         std::size_t first, std::size_t count);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return count_; }

    /// Row-major coordinates, size() * dim() values.
    std::span<const double> coordinates() const noexcept {
        return {storage_->data() + first_ * dim_, count_ * dim_};
    }
    std::span<const double> point(std::size_t i) const noexcept {
        return {storage_->data() + (first_ + i) * dim_, dim_};
    }
    double weight(std::size_t i) const noexcept {
        return weights_ ? (*weights_)[i] : 1.0 / static_cast<double>(count_);
    }
    bool has_uniform_weights() const noexcept { return weights_ == nullptr; }
    std::vector<double> weights() const;

    /// Weighted mean of one coordinate.
    double mean(std::size_t axis = 0) const;

    /// Bitwise equality of dimension, points and weights.
    bool identical_to(const EmpiricalMeasure& other) const noexcept;

private:
    EmpiricalMeasure(std::size_t dim, std::shared_ptr<const std::vector<double>> storage,
                     std::size_t first, std::size_t count,
                     std::shared_ptr<const std::vector<double>> weights);

    std::size_t dim_;
    std::shared_ptr<const std::vector<double>> storage_;
    std::size_t first_;
    std::size_t count_;
    std::shared_ptr<const std::vector<double>> weights_;
};

/// Time-indexed family of measures on a strictly increasing grid starting at 0.
class MeasureFlow {
public:
    MeasureFlow(std::vector<double> times, std::vector<EmpiricalMeasure> measures);

    /// The same measure at every grid time.
    static MeasureFlow constant(std::vector<double> times, const EmpiricalMeasure& measure);

    const std::vector<double>& times() const noexcept { return times_; }
    std::size_t size() const noexcept { return times_.size(); }
    std::size_t dim() const noexcept { return measures_.front().dim(); }
    const EmpiricalMeasure& operator[](std::size_t k) const noexcept { return measures_[k]; }
    const std::vector<EmpiricalMeasure>& measures() const noexcept { return measures_; }

    /// Index of the last grid time not after `t` (piecewise-constant from the left).
    std::size_t index_at(double t) const;
    const EmpiricalMeasure& at_time(double t) const { return measures_[index_at(t)]; }

    bool same_grid(const MeasureFlow& other) const noexcept;
    bool identical_to(const MeasureFlow& other) const noexcept;

private:
    std::vector<double> times_;
    std::vector<EmpiricalMeasure> measures_;
};

/// Histogram lattice rule for the total-variation estimator.
struct BinningRule {
    enum class Kind { freedman_diaconis, fixed_width };

    Kind kind = Kind::freedman_diaconis;
    double width = 0.0;  // per-axis width for fixed_width
    std::size_t max_bins_per_axis = 512;
    /// Measures with at most this many distinct atoms are compared atom by atom.
    std::size_t atomic_support_limit = 64;
};

/// Regular lattice shared by the histograms being compared.
struct BinLattice {
    std::vector<double> origin;
    std::vector<double> bin_width;
    std::vector<std::size_t> bins;

    std::size_t dim() const noexcept { return origin.size(); }
    std::uint64_t cell_count() const noexcept;
    std::uint64_t cell_of(std::span<const double> x) const noexcept;
};

/// Two histograms on an identical lattice; only non-empty cells are stored,
/// in ascending cell order.
struct HistogramPair {
    struct Cell {
        std::uint64_t index;
        std::uint64_t count_a;
        std::uint64_t count_b;
        double mass_a;
        double mass_b;
    };

    BinLattice lattice;
    std::vector<Cell> cells;
    std::uint64_t total_a = 0;
    std::uint64_t total_b = 0;

    /// Half the l1 distance between the normalized bin masses.
    double total_variation() const;
};

/// Lattice covering the joint bounding box of `measures`; the Freedman-Diaconis
/// width 2 IQR n^(-1/3) is taken on the pooled sample, clamped to max_bins_per_axis.
BinLattice make_lattice(std::span<const EmpiricalMeasure* const> measures,
                        const BinningRule& rule = {});

HistogramPair build_histogram_pair(const BinLattice& lattice, const EmpiricalMeasure& a,
                                   const EmpiricalMeasure& b);

/// TV of the binned laws on a caller-supplied lattice.
double tv_on_lattice(const BinLattice& lattice, const EmpiricalMeasure& a,
                     const EmpiricalMeasure& b);

/// Total variation sup_A |mu(A) - nu(A)|, valued in [0, 1].
///
/// Small atomic supports are compared exactly atom by atom; otherwise this is
/// the TV of the histogram-binned laws (an estimator of the continuous TV).
double tv_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                   const BinningRule& rule = {});

enum class TransportMethod { identical, exact_1d, exact_assignment, entropic };

std::string to_string(TransportMethod method);

struct WassersteinOptions {
    std::size_t assignment_cap = 512;
    /// Entropic regularization as a fraction of the median pairwise cost.
    double epsilon_scale = 0.01;
    std::size_t sinkhorn_max_iter = 20000;
    double sinkhorn_tolerance = 1e-10;
    /// Largest dense cost matrix (entries) built for d > 1.
    std::size_t max_cost_entries = 25'000'000;
};

struct WassersteinResult {
    double value = 0.0;
    TransportMethod method = TransportMethod::identical;
    double epsilon = 0.0;
    /// epsilon * log(N) for the entropic path, 0 for exact paths.
    double accuracy = 0.0;
    std::size_t iterations = 0;
};

WassersteinResult wasserstein_detailed(double theta, const EmpiricalMeasure& mu,
                                       const EmpiricalMeasure& nu,
                                       const WassersteinOptions& options = {});

/// W_theta(mu, nu) for theta >= 1.
double wasserstein(double theta, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                   const WassersteinOptions& options = {});

/// sum_i w_i |x_i|^theta.
double moment(const EmpiricalMeasure& mu, double theta);

/// Per-grid-time distances between two flows on the same grid.
struct FlowDistanceProfile {
    std::vector<double> times;
    std::vector<double> tv;
    std::vector<double> wasserstein;  // empty unless requested

    double max_tv() const;
    double max_tv_plus_wasserstein() const;
};

/// theta <= 0 skips the Wasserstein component.
FlowDistanceProfile flow_distance_profile(const MeasureFlow& a, const MeasureFlow& b,
                                          double theta, const BinningRule& binning = {},
                                          const WassersteinOptions& options = {});

/// sup_t ||a_t - b_t||_TV over the grid.
double flow_metric_rho(const MeasureFlow& a, const MeasureFlow& b,
                       const BinningRule& binning = {});

/// sup_t (||a_t - b_t||_TV + W_theta(a_t, b_t)) over the grid.
double flow_metric_rho_tilde(double theta, const MeasureFlow& a, const MeasureFlow& b,
                             const BinningRule& binning = {},
                             const WassersteinOptions& options = {});

}  // namespace mvflow
