#include "mvflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "mvflow/error.hpp"
#include "mvflow/summation.hpp"
#include "mvflow/transport.hpp"

namespace mvflow {

namespace {

constexpr double kWeightSumTolerance = 1e-12;

double compensated_sum(std::span<const double> values) noexcept {
    double sum = 0.0, carry = 0.0;
    for (double v : values) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    return sum;
}

double euclidean_distance(std::span<const double> x, std::span<const double> y) noexcept {
    if (x.size() == 1) return std::abs(x[0] - y[0]);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - y[j];
        s += d * d;
    }
    return std::sqrt(s);
}

double power_cost(double distance, double theta) noexcept {
    if (theta == 1.0) return distance;
    if (theta == 2.0) return distance * distance;
    return std::pow(distance, theta);
}

}  // namespace

// ---------------------------------------------------------------------------
// EmpiricalMeasure

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim,
                                   std::shared_ptr<const std::vector<double>> storage,
                                   std::size_t first, std::size_t count,
                                   std::shared_ptr<const std::vector<double>> weights)
    : dim_(dim),
      storage_(std::move(storage)),
      first_(first),
      count_(count),
      weights_(std::move(weights)) {}

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> coordinates,
                                   std::vector<double> weights)
    : dim_(dim), first_(0), count_(0) {
    if (dim == 0) throw InvalidArgument("EmpiricalMeasure: dimension must be positive");
    if (coordinates.empty()) throw InvalidArgument("EmpiricalMeasure: empty point list");
    if (coordinates.size() % dim != 0) {
        throw InvalidArgument("EmpiricalMeasure: coordinate count is not a multiple of dim");
    }
    count_ = coordinates.size() / dim;
    if (weights.size() != count_) {
        throw InvalidArgument("EmpiricalMeasure: one weight per point required");
    }
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw InvalidArgument("EmpiricalMeasure: weights must be finite and nonnegative");
        }
    }
    if (std::abs(compensated_sum(weights) - 1.0) > kWeightSumTolerance) {
        throw InvalidArgument("EmpiricalMeasure: weights must sum to 1");
    }
    for (double x : coordinates) {
        if (!std::isfinite(x)) throw InvalidArgument("EmpiricalMeasure: non-finite coordinate");
    }
    storage_ = std::make_shared<const std::vector<double>>(std::move(coordinates));
    weights_ = std::make_shared<const std::vector<double>>(std::move(weights));
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::size_t dim, std::vector<double> coordinates) {
    if (dim == 0) throw InvalidArgument("EmpiricalMeasure: dimension must be positive");
    if (coordinates.empty()) throw InvalidArgument("EmpiricalMeasure: empty point list");
    if (coordinates.size() % dim != 0) {
        throw InvalidArgument("EmpiricalMeasure: coordinate count is not a multiple of dim");
    }
    for (double x : coordinates) {
        if (!std::isfinite(x)) throw InvalidArgument("EmpiricalMeasure: non-finite coordinate");
    }
    const std::size_t n = coordinates.size() / dim;
    return EmpiricalMeasure(dim, std::make_shared<const std::vector<double>>(std::move(coordinates)),
                            0, n, nullptr);
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::vector<double> point) {
    const std::size_t dim = point.size();
    return uniform(dim, std::move(point));
}

EmpiricalMeasure EmpiricalMeasure::uniform_view(std::size_t dim,
                                                std::shared_ptr<const std::vector<double>> storage,
                                                std::size_t first, std::size_t count) {
    if (dim == 0 || count == 0) throw InvalidArgument("EmpiricalMeasure: empty view");
    if (!storage || (first + count) * dim > storage->size()) {
        throw InvalidArgument("EmpiricalMeasure: view exceeds storage");
    }
    return EmpiricalMeasure(dim, std::move(storage), first, count, nullptr);
}

std::vector<double> EmpiricalMeasure::weights() const {
    if (weights_) return *weights_;
    return std::vector<double>(count_, 1.0 / static_cast<double>(count_));
}

double EmpiricalMeasure::mean(std::size_t axis) const {
    if (axis >= dim_) throw InvalidArgument("EmpiricalMeasure::mean: axis out of range");
    std::vector<double> terms(count_);
    const auto xs = coordinates();
    for (std::size_t i = 0; i < count_; ++i) terms[i] = xs[i * dim_ + axis] * weight(i);
    return pairwise_sum(terms);
}

bool EmpiricalMeasure::identical_to(const EmpiricalMeasure& other) const noexcept {
    if (dim_ != other.dim_ || count_ != other.count_) return false;
    if (has_uniform_weights() != other.has_uniform_weights()) {
        for (std::size_t i = 0; i < count_; ++i) {
            if (weight(i) != other.weight(i)) return false;
        }
    } else if (weights_ && weights_ != other.weights_ && *weights_ != *other.weights_) {
        return false;
    }
    if (storage_ == other.storage_ && first_ == other.first_) return true;
    const auto a = coordinates();
    const auto b = other.coordinates();
    return std::equal(a.begin(), a.end(), b.begin());
}

// ---------------------------------------------------------------------------
// MeasureFlow

MeasureFlow::MeasureFlow(std::vector<double> times, std::vector<EmpiricalMeasure> measures)
    : times_(std::move(times)), measures_(std::move(measures)) {
    if (times_.empty()) throw InvalidArgument("MeasureFlow: empty time grid");
    if (times_.size() != measures_.size()) {
        throw InvalidArgument("MeasureFlow: one measure per grid time required");
    }
    if (times_.front() != 0.0) throw InvalidArgument("MeasureFlow: grid must start at 0");
    for (std::size_t k = 1; k < times_.size(); ++k) {
        if (!(times_[k] > times_[k - 1])) {
            throw InvalidArgument("MeasureFlow: times must be strictly increasing");
        }
    }
    const std::size_t d = measures_.front().dim();
    for (const auto& m : measures_) {
        if (m.dim() != d) throw InvalidArgument("MeasureFlow: measures differ in dimension");
    }
}

MeasureFlow MeasureFlow::constant(std::vector<double> times, const EmpiricalMeasure& measure) {
    std::vector<EmpiricalMeasure> measures(times.size(), measure);
    return MeasureFlow(std::move(times), std::move(measures));
}

std::size_t MeasureFlow::index_at(double t) const {
    // Grid times produced as k*h can differ from the requested time by rounding.
    const double slack = 1e-9 * std::max(1.0, std::abs(times_.back()));
    if (t < -slack) throw InvalidArgument("MeasureFlow: lookup before time 0");
    const auto it = std::upper_bound(times_.begin(), times_.end(), t + slack);
    return static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1;
}

bool MeasureFlow::same_grid(const MeasureFlow& other) const noexcept {
    if (times_.size() != other.times_.size()) return false;
    for (std::size_t k = 0; k < times_.size(); ++k) {
        const double tol = 1e-12 * std::max(1.0, std::abs(times_[k]));
        if (std::abs(times_[k] - other.times_[k]) > tol) return false;
    }
    return true;
}

bool MeasureFlow::identical_to(const MeasureFlow& other) const noexcept {
    if (times_ != other.times_) return false;
    for (std::size_t k = 0; k < measures_.size(); ++k) {
        if (!measures_[k].identical_to(other.measures_[k])) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Histogram lattice and TV

std::uint64_t BinLattice::cell_count() const noexcept {
    std::uint64_t total = 1;
    for (auto b : bins) total *= b;
    return total;
}

std::uint64_t BinLattice::cell_of(std::span<const double> x) const noexcept {
    std::uint64_t index = 0;
    for (std::size_t j = 0; j < origin.size(); ++j) {
        const double offset = (x[j] - origin[j]) / bin_width[j];
        std::uint64_t k = 0;
        if (offset > 0.0) {
            k = static_cast<std::uint64_t>(offset);
            if (k >= bins[j]) k = bins[j] - 1;
        }
        index = index * bins[j] + k;
    }
    return index;
}

namespace {

struct WeightedValue {
    double value;
    double weight;
};

/// Type-7 quantiles of an equally weighted sample.
std::pair<double, double> equal_weight_quartiles(std::vector<double> values) {
    const auto quantile = [&values](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo),
                         values.end());
        const double lo_value = values[lo];
        if (lo + 1 >= values.size()) return lo_value;
        const double hi_value =
            *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
        return lo_value + (pos - static_cast<double>(lo)) * (hi_value - lo_value);
    };
    const double q1 = quantile(0.25);
    const double q3 = quantile(0.75);
    return {q1, q3};
}

std::pair<double, double> weighted_quartiles(std::vector<WeightedValue> values) {
    std::sort(values.begin(), values.end(),
              [](const WeightedValue& a, const WeightedValue& b) { return a.value < b.value; });
    const auto quantile = [&values](double q) {
        double cumulative = 0.0;
        for (const auto& v : values) {
            cumulative += v.weight;
            if (cumulative >= q) return v.value;
        }
        return values.back().value;
    };
    return {quantile(0.25), quantile(0.75)};
}

/// Distinct atoms with their weights, sorted lexicographically; stops early
/// (returning false) once more than `limit` distinct points are seen.
bool collect_atoms(const EmpiricalMeasure& mu, std::size_t limit,
                   std::vector<std::pair<std::vector<double>, double>>& atoms) {
    atoms.clear();
    const std::size_t d = mu.dim();
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const auto p = mu.point(i);
        bool found = false;
        for (auto& atom : atoms) {
            if (std::equal(p.begin(), p.end(), atom.first.begin())) {
                atom.second += mu.weight(i);
                found = true;
                break;
            }
        }
        if (!found) {
            if (atoms.size() == limit) return false;
            atoms.emplace_back(std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(d)),
                               mu.weight(i));
        }
    }
    std::sort(atoms.begin(), atoms.end());
    return true;
}

double atomic_tv(const std::vector<std::pair<std::vector<double>, double>>& a,
                 const std::vector<std::pair<std::vector<double>, double>>& b) {
    std::vector<double> diffs;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            diffs.push_back(a[i++].second);
        } else if (i == a.size() || b[j].first < a[i].first) {
            diffs.push_back(b[j++].second);
        } else {
            diffs.push_back(std::abs(a[i++].second - b[j++].second));
        }
    }
    return std::clamp(0.5 * pairwise_sum(diffs), 0.0, 1.0);
}

void check_same_dim(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const char* who) {
    if (mu.dim() != nu.dim()) {
        throw InvalidArgument(std::string(who) + ": dimension mismatch");
    }
}

}  // namespace

BinLattice make_lattice(std::span<const EmpiricalMeasure* const> measures, const BinningRule& rule) {
    if (measures.empty()) throw InvalidArgument("make_lattice: no measures");
    const std::size_t d = measures.front()->dim();
    for (const auto* m : measures) {
        if (m->dim() != d) throw InvalidArgument("make_lattice: dimension mismatch");
    }
    if (rule.max_bins_per_axis == 0) throw InvalidArgument("make_lattice: max_bins_per_axis is 0");

    std::size_t pooled = 0;
    bool equal_weights = true;
    for (const auto* m : measures) {
        pooled += m->size();
        equal_weights = equal_weights && m->has_uniform_weights() &&
                        m->size() == measures.front()->size();
    }

    BinLattice lattice;
    lattice.origin.resize(d);
    lattice.bin_width.resize(d);
    lattice.bins.resize(d);
    const double share = 1.0 / static_cast<double>(measures.size());

    for (std::size_t axis = 0; axis < d; ++axis) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto* m : measures) {
            const auto xs = m->coordinates();
            for (std::size_t i = 0; i < m->size(); ++i) {
                lo = std::min(lo, xs[i * d + axis]);
                hi = std::max(hi, xs[i * d + axis]);
            }
        }
        const double range = hi - lo;
        double width = 0.0;
        if (rule.kind == BinningRule::Kind::fixed_width) {
            if (!(rule.width > 0.0)) throw InvalidArgument("make_lattice: fixed width must be positive");
            width = rule.width;
        } else if (range > 0.0) {
            double q1 = 0.0, q3 = 0.0;
            if (equal_weights) {
                std::vector<double> values;
                values.reserve(pooled);
                for (const auto* m : measures) {
                    const auto xs = m->coordinates();
                    for (std::size_t i = 0; i < m->size(); ++i) values.push_back(xs[i * d + axis]);
                }
                std::tie(q1, q3) = equal_weight_quartiles(std::move(values));
            } else {
                std::vector<WeightedValue> values;
                values.reserve(pooled);
                for (const auto* m : measures) {
                    const auto xs = m->coordinates();
                    for (std::size_t i = 0; i < m->size(); ++i) {
                        values.push_back({xs[i * d + axis], share * m->weight(i)});
                    }
                }
                std::tie(q1, q3) = weighted_quartiles(std::move(values));
            }
            width = 2.0 * (q3 - q1) * std::cbrt(1.0 / static_cast<double>(pooled));
        }
        const double min_width = range / static_cast<double>(rule.max_bins_per_axis);
        if (range > 0.0 && !(width >= min_width)) width = min_width;  // bin cap
        if (range == 0.0) {
            lattice.origin[axis] = lo;
            lattice.bin_width[axis] = width > 0.0 ? width : 1.0;
            lattice.bins[axis] = 1;
            continue;
        }
        lattice.origin[axis] = lo;
        lattice.bin_width[axis] = width;
        const auto needed = static_cast<std::size_t>(std::ceil(range / width));
        lattice.bins[axis] = std::clamp<std::size_t>(needed, 1, rule.max_bins_per_axis);
    }
    return lattice;
}

HistogramPair build_histogram_pair(const BinLattice& lattice, const EmpiricalMeasure& a,
                                   const EmpiricalMeasure& b) {
    check_same_dim(a, b, "build_histogram_pair");
    if (a.dim() != lattice.dim()) throw InvalidArgument("build_histogram_pair: lattice dimension");

    HistogramPair out;
    out.lattice = lattice;
    out.total_a = a.size();
    out.total_b = b.size();

    constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 22;
    const std::uint64_t cells = lattice.cell_count();
    if (cells <= kDenseLimit) {
        std::vector<std::uint64_t> count_a(cells, 0), count_b(cells, 0);
        std::vector<double> mass_a(cells, 0.0), mass_b(cells, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto c = lattice.cell_of(a.point(i));
            ++count_a[c];
            mass_a[c] += a.weight(i);
        }
        for (std::size_t i = 0; i < b.size(); ++i) {
            const auto c = lattice.cell_of(b.point(i));
            ++count_b[c];
            mass_b[c] += b.weight(i);
        }
        for (std::uint64_t c = 0; c < cells; ++c) {
            if (count_a[c] == 0 && count_b[c] == 0) continue;
            out.cells.push_back({c, count_a[c], count_b[c], mass_a[c], mass_b[c]});
        }
        return out;
    }

    struct Entry {
        std::uint64_t cell;
        int side;
        double weight;
    };
    std::vector<Entry> entries;
    entries.reserve(a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) entries.push_back({lattice.cell_of(a.point(i)), 0, a.weight(i)});
    for (std::size_t i = 0; i < b.size(); ++i) entries.push_back({lattice.cell_of(b.point(i)), 1, b.weight(i)});
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& x, const Entry& y) { return x.cell < y.cell; });
    for (const auto& e : entries) {
        if (out.cells.empty() || out.cells.back().index != e.cell) {
            out.cells.push_back({e.cell, 0, 0, 0.0, 0.0});
        }
        auto& cell = out.cells.back();
        if (e.side == 0) {
            ++cell.count_a;
            cell.mass_a += e.weight;
        } else {
            ++cell.count_b;
            cell.mass_b += e.weight;
        }
    }
    return out;
}

double HistogramPair::total_variation() const {
    std::vector<double> diffs(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        diffs[i] = std::abs(cells[i].mass_a - cells[i].mass_b);
    }
    return std::clamp(0.5 * pairwise_sum(diffs), 0.0, 1.0);
}

double tv_on_lattice(const BinLattice& lattice, const EmpiricalMeasure& a,
                     const EmpiricalMeasure& b) {
    return build_histogram_pair(lattice, a, b).total_variation();
}

double tv_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const BinningRule& rule) {
    check_same_dim(mu, nu, "tv_distance");
    if (mu.dim() > 3) throw InvalidArgument("tv_distance: histogram estimator supports d <= 3");
    if (mu.identical_to(nu)) return 0.0;

    std::vector<std::pair<std::vector<double>, double>> atoms_mu, atoms_nu;
    if (collect_atoms(mu, rule.atomic_support_limit, atoms_mu) &&
        collect_atoms(nu, rule.atomic_support_limit, atoms_nu)) {
        return atomic_tv(atoms_mu, atoms_nu);
    }
    const EmpiricalMeasure* pair[] = {&mu, &nu};
    const BinLattice lattice = make_lattice(pair, rule);
    return tv_on_lattice(lattice, mu, nu);
}

// ---------------------------------------------------------------------------
// Wasserstein

std::string to_string(TransportMethod method) {
    switch (method) {
        case TransportMethod::identical: return "identical";
        case TransportMethod::exact_1d: return "exact_1d";
        case TransportMethod::exact_assignment: return "exact_assignment";
        case TransportMethod::entropic: return "entropic";
    }
    return "unknown";
}

namespace {

double wasserstein_1d(double theta, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const auto sorted_values = [](const EmpiricalMeasure& m) {
        const auto xs = m.coordinates();
        return std::vector<double>(xs.begin(), xs.end());
    };
    if (mu.size() == nu.size() && mu.has_uniform_weights() && nu.has_uniform_weights()) {
        auto x = sorted_values(mu);
        auto y = sorted_values(nu);
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        std::vector<double> costs(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) costs[i] = power_cost(std::abs(x[i] - y[i]), theta);
        const double cost = pairwise_sum(costs) / static_cast<double>(x.size());
        return std::pow(cost, 1.0 / theta);
    }

    // Monotone coupling on the common refinement of the two CDFs.
    const auto sorted_atoms = [](const EmpiricalMeasure& m) {
        std::vector<WeightedValue> v(m.size());
        const auto xs = m.coordinates();
        for (std::size_t i = 0; i < m.size(); ++i) v[i] = {xs[i], m.weight(i)};
        std::sort(v.begin(), v.end(),
                  [](const WeightedValue& a, const WeightedValue& b) { return a.value < b.value; });
        return v;
    };
    const auto a = sorted_atoms(mu);
    const auto b = sorted_atoms(nu);
    std::vector<double> costs;
    costs.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    double rem_a = a[0].weight, rem_b = b[0].weight;
    while (i < a.size() && j < b.size()) {
        const double mass = std::min(rem_a, rem_b);
        if (mass > 0.0) costs.push_back(mass * power_cost(std::abs(a[i].value - b[j].value), theta));
        rem_a -= mass;
        rem_b -= mass;
        // Advance whichever side is exhausted; ties advance both.
        const bool next_a = rem_a <= rem_b;
        const bool next_b = rem_b <= rem_a;
        if (next_a && ++i < a.size()) rem_a = a[i].weight;
        if (next_b && ++j < b.size()) rem_b = b[j].weight;
    }
    return std::pow(std::max(pairwise_sum(costs), 0.0), 1.0 / theta);
}

Eigen::MatrixXd cost_matrix(double theta, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(mu.size()), static_cast<Eigen::Index>(nu.size()));
    for (std::size_t i = 0; i < mu.size(); ++i) {
        for (std::size_t j = 0; j < nu.size(); ++j) {
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                power_cost(euclidean_distance(mu.point(i), nu.point(j)), theta);
        }
    }
    return cost;
}

}  // namespace

WassersteinResult wasserstein_detailed(double theta, const EmpiricalMeasure& mu,
                                       const EmpiricalMeasure& nu, const WassersteinOptions& options) {
    check_same_dim(mu, nu, "wasserstein");
    if (!(theta >= 1.0) || !std::isfinite(theta)) {
        throw InvalidArgument("wasserstein: theta must be >= 1");
    }
    WassersteinResult result;
    if (mu.identical_to(nu)) {
        result.method = TransportMethod::identical;
        return result;
    }
    if (mu.dim() == 1) {
        result.method = TransportMethod::exact_1d;
        result.value = wasserstein_1d(theta, mu, nu);
        return result;
    }
    const bool assignable = mu.size() == nu.size() && mu.size() <= options.assignment_cap &&
                            mu.has_uniform_weights() && nu.has_uniform_weights();
    if (static_cast<double>(mu.size()) * static_cast<double>(nu.size()) >
        static_cast<double>(options.max_cost_entries)) {
        throw InvalidArgument("wasserstein: supports of " + std::to_string(mu.size()) + " and " +
                              std::to_string(nu.size()) + " points exceed the dense cost matrix limit in d > 1");
    }
    const Eigen::MatrixXd cost = cost_matrix(theta, mu, nu);
    if (assignable) {
        const auto assignment = transport::min_cost_assignment(cost);
        result.method = TransportMethod::exact_assignment;
        result.value = std::pow(assignment.cost / static_cast<double>(mu.size()), 1.0 / theta);
        return result;
    }

    std::vector<double> entries(cost.data(), cost.data() + cost.size());
    const auto mid = entries.begin() + static_cast<std::ptrdiff_t>(entries.size() / 2);
    std::nth_element(entries.begin(), mid, entries.end());
    double epsilon = options.epsilon_scale * *mid;
    if (!(epsilon > 0.0)) epsilon = options.epsilon_scale * cost.maxCoeff();
    if (!(epsilon > 0.0)) return result;  // every pair at distance zero

    const auto a = mu.weights();
    const auto b = nu.weights();
    const auto solved = transport::sinkhorn(cost, a, b, epsilon, options.sinkhorn_max_iter,
                                            options.sinkhorn_tolerance);
    result.method = TransportMethod::entropic;
    result.value = std::pow(std::max(solved.transport_cost, 0.0), 1.0 / theta);
    result.epsilon = epsilon;
    result.accuracy = epsilon * std::log(static_cast<double>(std::max(mu.size(), nu.size())));
    result.iterations = solved.iterations;
    return result;
}

double wasserstein(double theta, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                   const WassersteinOptions& options) {
    return wasserstein_detailed(theta, mu, nu, options).value;
}

double moment(const EmpiricalMeasure& mu, double theta) {
    if (!(theta > 0.0)) throw InvalidArgument("moment: theta must be positive");
    std::vector<double> terms(mu.size());
    const std::vector<double> origin(mu.dim(), 0.0);
    for (std::size_t i = 0; i < mu.size(); ++i) {
        terms[i] = mu.weight(i) * std::pow(euclidean_distance(mu.point(i), origin), theta);
    }
    return pairwise_sum(terms);
}

// ---------------------------------------------------------------------------
// Flow metrics

double FlowDistanceProfile::max_tv() const {
    return tv.empty() ? 0.0 : *std::max_element(tv.begin(), tv.end());
}

double FlowDistanceProfile::max_tv_plus_wasserstein() const {
    double best = 0.0;
    for (std::size_t k = 0; k < tv.size(); ++k) {
        best = std::max(best, tv[k] + (wasserstein.empty() ? 0.0 : wasserstein[k]));
    }
    return best;
}

FlowDistanceProfile flow_distance_profile(const MeasureFlow& a, const MeasureFlow& b, double theta,
                                          const BinningRule& binning,
                                          const WassersteinOptions& options) {
    if (!a.same_grid(b)) throw InvalidArgument("flow metric: time grids differ");
    if (a.dim() != b.dim()) throw InvalidArgument("flow metric: dimension mismatch");
    const std::size_t n = a.size();
    FlowDistanceProfile profile;
    profile.times = a.times();
    profile.tv.assign(n, 0.0);
    const bool with_w = theta > 0.0;
    if (with_w) profile.wasserstein.assign(n, 0.0);

    // Each time slot is written by exactly one iteration.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
        const auto idx = static_cast<std::size_t>(k);
        profile.tv[idx] = tv_distance(a[idx], b[idx], binning);
        if (with_w) profile.wasserstein[idx] = wasserstein(theta, a[idx], b[idx], options);
    }
    return profile;
}

double flow_metric_rho(const MeasureFlow& a, const MeasureFlow& b, const BinningRule& binning) {
    return flow_distance_profile(a, b, 0.0, binning).max_tv();
}

double flow_metric_rho_tilde(double theta, const MeasureFlow& a, const MeasureFlow& b,
                             const BinningRule& binning, const WassersteinOptions& options) {
    if (!(theta >= 1.0)) throw InvalidArgument("flow_metric_rho_tilde: theta must be >= 1");
    return flow_distance_profile(a, b, theta, binning, options).max_tv_plus_wasserstein();
}

}  // namespace mvflow
