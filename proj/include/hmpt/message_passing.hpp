#pragma once

#include "hmpt/models.hpp"
#include "hmpt/priors.hpp"
#include "hmpt/tree.hpp"

#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

namespace hmpt {

/// Exact per-node messages on a fixed tree. phi/Phi are in log space;
/// xi_tilde and gamma are linear probabilities.
struct MessageSet {
    int states = 1;
    std::vector<double> log_phi;   ///< node x I: log phi_A(i)
    std::vector<double> log_Phi;   ///< node x I: log Phi_A(i)
    std::vector<double> xi_tilde;  ///< node x I x I: posterior transitions
    std::vector<double> gamma;     ///< node x I: marginal state posteriors
    double log_marginal = 0.0;     ///< log P(x | T)

    std::span<const double> phi_of(int id) const { return {log_phi.data() + id * states, std::size_t(states)}; }
    std::span<const double> Phi_of(int id) const { return {log_Phi.data() + id * states, std::size_t(states)}; }
    std::span<const double> xi_tilde_of(int id) const {
        return {xi_tilde.data() + id * states * states, std::size_t(states * states)};
    }
    std::span<const double> gamma_of(int id) const { return {gamma.data() + id * states, std::size_t(states)}; }
    /// P(V(A) = 0 | x, T), the alternative-state probability of a two-sample model.
    double pmap(int id) const { return gamma[id * states]; }
};

/// log M_i(A | J) at an internal node, from its children's counts.
void node_log_marginals(const PartitionTree& tree, int id, const StateModel& model, std::span<double> out);

/// Bottom-up pass: phi, Phi and log P(x | T).
MessageSet upward_pass(const PartitionTree& tree, const StateModel& model);
void posterior_transitions(MessageSet& msgs, const PartitionTree& tree, const StateModel& model);
void downward_pass(MessageSet& msgs, const PartitionTree& tree, const StateModel& model);
/// All three passes.
MessageSet compute_messages(const PartitionTree& tree, const StateModel& model);
double tree_log_marginal(const PartitionTree& tree, const StateModel& model);

/// P(no internal node is in the decoupled state | x, T) for the two-sample scanning model.
double global_null_probability(const PartitionTree& tree, const MessageSet& msgs, const StateModel& model);

/// log P(T) + log P(x | T) per tree, and the first index of the maximum.
struct MapResult {
    std::size_t index = 0;
    std::vector<double> scores;
};
MapResult map_tree(std::span<const std::shared_ptr<const PartitionTree>> trees, const TreePriorConfig& prior,
                   const StateModel& model);

nlohmann::ordered_json messages_to_json(const PartitionTree& tree, const MessageSet& msgs);

} // namespace hmpt
