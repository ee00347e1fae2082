#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace hmpt {

/// Partition prior: dimension weights and grid-location weights whose tails
/// decay as exp(-eta * n(A) * f(|l/grid - 1/2|)).
struct TreePriorConfig {
    int grid = 32;
    double eta = 0.01;
    /// Empty means uniform 1/d.
    std::vector<double> dim_weights;
    bool spike = false;
    /// Increasing with f(0) = 0. "identity" and "square" are serializable.
    std::string penalty = "identity";

    double apply_penalty(double x) const;
};

void validate(const TreePriorConfig& cfg, std::size_t dim);

/// log lambda_j for j = 0..d-1.
std::vector<double> log_dim_weights(const TreePriorConfig& cfg, std::size_t dim);

/// log beta_l for l = 1..grid-1 (index l-1), normalized with max-subtraction.
std::vector<double> log_location_weights(std::size_t n_node, const TreePriorConfig& cfg);

/// Spike-and-slab view of the location prior at one node.
struct SpikeWeights {
    double log_refix = 0.0;     ///< log P(R(A)=1 | R(A^p))
    double log_no_refix = 0.0;  ///< log P(R(A)=0 | R(A^p))
    /// log hat-beta_l (index l-1); -inf at the midpoint.
    std::vector<double> log_slab;
};

/// r(A) = beta_{grid/2}; slab weights renormalize the remaining beta_l. A refixed
/// parent forces R(A)=1 with probability one.
SpikeWeights spike_weights(std::size_t n_node, bool parent_refixed, const TreePriorConfig& cfg);

} // namespace hmpt
