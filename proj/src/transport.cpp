#include "mvflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvflow/error.hpp"

namespace mvflow::transport {

Assignment min_cost_assignment(const Eigen::MatrixXd& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    if (cost.cols() != cost.rows()) {
        throw InvalidArgument("min_cost_assignment: cost matrix must be square");
    }
    Assignment out;
    if (n == 0) return out;

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-based bookkeeping; index 0 is the virtual source column.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);

    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = row_of_col[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1),
                                        static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    out.column_of_row.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) out.column_of_row[row_of_col[j] - 1] = j - 1;
    // Recompute the cost from the matching itself rather than the duals.
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.column_of_row[i]));
    }
    out.cost = total;
    return out;
}

namespace {

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

SinkhornResult sinkhorn(const Eigen::MatrixXd& cost, std::span<const double> a,
                        std::span<const double> b, double epsilon, std::size_t max_iter,
                        double tolerance) {
    const auto n = cost.rows();
    const auto m = cost.cols();
    if (static_cast<std::size_t>(n) != a.size() || static_cast<std::size_t>(m) != b.size()) {
        throw InvalidArgument("sinkhorn: marginal sizes do not match the cost matrix");
    }
    if (!(epsilon > 0.0)) throw InvalidArgument("sinkhorn: epsilon must be positive");

    Eigen::VectorXd log_a(n), log_b(m);
    for (Eigen::Index i = 0; i < n; ++i) log_a[i] = std::log(a[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m; ++j) log_b[j] = std::log(b[static_cast<std::size_t>(j)]);

    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m);

    // Anneal from the cost scale down to the target epsilon.
    const double scale = std::max(cost.maxCoeff(), epsilon);
    double eps = scale;
    SinkhornResult result;
    std::size_t iter = 0;
    double err = std::numeric_limits<double>::infinity();
    while (true) {
        const bool final_stage = eps <= epsilon;
        if (final_stage) eps = epsilon;
        for (std::size_t k = 0; k < max_iter; ++k, ++iter) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::VectorXd row = (g.array() - cost.row(i).transpose().array()) / eps;
                f[i] = -eps * log_sum_exp(row + log_b);
            }
            err = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                const Eigen::VectorXd col = (f.array() - cost.col(j).array()) / eps;
                const double lse = log_sum_exp(col + log_a);
                g[j] = -eps * lse;
            }
            // Row-marginal violation after the column update.
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::VectorXd row = (g.array() - cost.row(i).transpose().array()) / eps;
                const double mass = std::exp(log_a[i] + f[i] / eps + log_sum_exp(row + log_b));
                err += std::abs(mass - a[static_cast<std::size_t>(i)]);
            }
            if (err < tolerance) break;
        }
        if (final_stage) break;
        eps = std::max(eps * 0.5, epsilon);
    }

    result.plan.resize(n, m);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double p =
                std::exp(log_a[i] + log_b[j] + (f[i] + g[j] - cost(i, j)) / eps);
            result.plan(i, j) = p;
            total += p * cost(i, j);
        }
    }
    result.transport_cost = total;
    result.iterations = iter;
    result.marginal_error = err;
    return result;
}

}  // namespace mvflow::transport
