#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mvflow::transport {

struct Assignment {
    double cost = 0.0;
    /// column assigned to each row
    std::vector<std::size_t> column_of_row;
};

/// Exact minimum-cost perfect matching on a square cost matrix
/// (shortest augmenting paths with dual potentials, O(n^3)).
Assignment min_cost_assignment(const Eigen::MatrixXd& cost);

struct SinkhornResult {
    Eigen::MatrixXd plan;
    /// <plan, cost>
    double transport_cost = 0.0;
    std::size_t iterations = 0;
    double marginal_error = 0.0;
};

/// Log-domain Sinkhorn with epsilon annealing down to `epsilon`.
SinkhornResult sinkhorn(const Eigen::MatrixXd& cost, std::span<const double> a,
                        std::span<const double> b, double epsilon, std::size_t max_iter,
                        double tolerance);

}  // namespace mvflow::transport
