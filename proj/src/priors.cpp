#include "hmpt/priors.hpp"

#include "hmpt/numeric.hpp"

#include <cmath>
#include <stdexcept>

namespace hmpt {

double TreePriorConfig::apply_penalty(double x) const {
    if (penalty == "identity") return x;
    if (penalty == "square") return x * x;
    throw std::invalid_argument("unknown location penalty '" + penalty + "'");
}

void validate(const TreePriorConfig& cfg, std::size_t dim) {
    if (cfg.grid < 2) throw std::invalid_argument("grid must be at least 2");
    if (cfg.spike && cfg.grid % 2 != 0) throw std::invalid_argument("spike prior needs an even grid");
    if (!(cfg.eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
    cfg.apply_penalty(0.0);
    if (!cfg.dim_weights.empty()) {
        if (cfg.dim_weights.size() != dim) throw std::invalid_argument("dim_weights length must equal d");
        double total = 0.0;
        for (double w : cfg.dim_weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("dim_weights must be nonnegative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("dim_weights must sum to 1");
    }
}

std::vector<double> log_dim_weights(const TreePriorConfig& cfg, std::size_t dim) {
    std::vector<double> out(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        out[j] = cfg.dim_weights.empty() ? -std::log(static_cast<double>(dim))
                                         : std::log(cfg.dim_weights[j]);
    }
    return out;
}

std::vector<double> log_location_weights(std::size_t n_node, const TreePriorConfig& cfg) {
    const int grid = cfg.grid;
    std::vector<double> out(grid - 1);
    const double scale = cfg.eta * static_cast<double>(n_node);
    for (int l = 1; l < grid; ++l) {
        const double offset = std::abs(static_cast<double>(l) / grid - 0.5);
        out[l - 1] = -scale * cfg.apply_penalty(offset);
    }
    const double z = log_sum_exp(out);
    for (double& v : out) v -= z;
    return out;
}

SpikeWeights spike_weights(std::size_t n_node, bool parent_refixed, const TreePriorConfig& cfg) {
    if (cfg.grid % 2 != 0) throw std::invalid_argument("spike prior needs an even grid");
    const int mid = cfg.grid / 2;
    SpikeWeights out;
    out.log_slab.assign(cfg.grid - 1, kNegInf);
    const auto beta = log_location_weights(n_node, cfg);
    std::vector<double> slab;
    for (int l = 1; l < cfg.grid; ++l) {
        if (l != mid) slab.push_back(beta[l - 1]);
    }
    const double log_slab_mass = log_sum_exp(slab);
    for (int l = 1; l < cfg.grid; ++l) {
        if (l != mid) out.log_slab[l - 1] = beta[l - 1] - log_slab_mass;
    }
    if (parent_refixed) {
        out.log_refix = 0.0;
        out.log_no_refix = kNegInf;
    } else {
        out.log_refix = beta[mid - 1];
        out.log_no_refix = log_slab_mass;  // 1 - r(A), computed without cancellation
    }
    return out;
}

} // namespace hmpt
