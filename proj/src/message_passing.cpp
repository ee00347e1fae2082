#include "hmpt/message_passing.hpp"

#include "hmpt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace hmpt {

namespace {

// log Phi(i) = log sum_i' xi_{i,i'} phi(i')
void mix_rows(std::span<const double> xi, std::span<const double> log_phi, int n, std::span<double> out) {
    std::vector<double> terms(n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            const double x = xi[i * n + k];
            terms[k] = x > 0.0 ? std::log(x) + log_phi[k] : kNegInf;
        }
        out[i] = log_sum_exp(terms);
    }
}

}  // namespace

void node_log_marginals(const PartitionTree& tree, int id, const StateModel& model, std::span<double> out) {
    const Decision d = tree.decision(id);
    const SplitCounts counts{tree.counts(tree.left(id)), tree.counts(tree.right(id))};
    model.log_marginals(counts, SplitContext{tree.depth(id), d.loc, tree.grid()}, out);
}

MessageSet upward_pass(const PartitionTree& tree, const StateModel& model) {
    const int n = model.num_states();
    if (tree.num_states() != n) throw std::invalid_argument("tree and model disagree on the number of states");
    MessageSet m;
    m.states = n;
    const std::size_t nodes = tree.size();
    m.log_phi.assign(nodes * n, 0.0);
    m.log_Phi.assign(nodes * n, 0.0);
    std::vector<double> xi(n * n);
    std::vector<double> lm(n);
    // Children always have larger ids than their parent.
    for (std::size_t k = nodes; k-- > 0;) {
        const int id = static_cast<int>(k);
        double* phi = m.log_phi.data() + id * n;
        if (tree.is_leaf(id)) {
            const double leaf = -static_cast<double>(tree.total(id)) * tree.log_volume(id);
            std::fill(phi, phi + n, leaf);
        } else {
            node_log_marginals(tree, id, model, lm);
            const auto pl = m.Phi_of(tree.left(id));
            const auto pr = m.Phi_of(tree.right(id));
            for (int i = 0; i < n; ++i) phi[i] = lm[i] + pl[i] + pr[i];
        }
        model.transition(tree.depth(id), xi);
        mix_rows(xi, {phi, std::size_t(n)}, n, {m.log_Phi.data() + id * n, std::size_t(n)});
    }
    const auto init = model.initial();
    std::vector<double> terms(n);
    for (int i = 0; i < n; ++i) terms[i] = init[i] > 0.0 ? std::log(init[i]) + m.log_phi[i] : kNegInf;
    m.log_marginal = log_sum_exp(terms);
    return m;
}

void posterior_transitions(MessageSet& m, const PartitionTree& tree, const StateModel& model) {
    const int n = m.states;
    m.xi_tilde.assign(tree.size() * n * n, 0.0);
    std::vector<double> xi(n * n);
    for (std::size_t k = 0; k < tree.size(); ++k) {
        const int id = static_cast<int>(k);
        model.transition(tree.depth(id), xi);
        const auto phi = m.phi_of(id);
        const auto Phi = m.Phi_of(id);
        double* out = m.xi_tilde.data() + id * n * n;
        for (int i = 0; i < n; ++i) {
            double row = 0.0;
            for (int j = 0; j < n; ++j) {
                const double x = xi[i * n + j];
                out[i * n + j] = x > 0.0 ? std::exp(std::log(x) + phi[j] - Phi[i]) : 0.0;
                row += out[i * n + j];
            }
            if (!(row > 0.0)) throw std::domain_error("posterior transition row has zero mass");
            for (int j = 0; j < n; ++j) out[i * n + j] /= row;
        }
    }
}

void downward_pass(MessageSet& m, const PartitionTree& tree, const StateModel& model) {
    const int n = m.states;
    m.gamma.assign(tree.size() * n, 0.0);
    const auto init = model.initial();
    std::vector<double> terms(n);
    for (int i = 0; i < n; ++i) terms[i] = init[i] > 0.0 ? std::log(init[i]) + m.log_phi[i] : kNegInf;
    normalize_log_weights(terms, {m.gamma.data(), std::size_t(n)});
    for (std::size_t k = 1; k < tree.size(); ++k) {
        const int id = static_cast<int>(k);
        const auto gp = m.gamma_of(tree.parent(id));
        const auto xt = m.xi_tilde_of(id);
        double* g = m.gamma.data() + id * n;
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += gp[i] * xt[i * n + j];
            g[j] = s;
        }
    }
}

MessageSet compute_messages(const PartitionTree& tree, const StateModel& model) {
    MessageSet m = upward_pass(tree, model);
    posterior_transitions(m, tree, model);
    downward_pass(m, tree, model);
    return m;
}

double tree_log_marginal(const PartitionTree& tree, const StateModel& model) {
    return upward_pass(tree, model).log_marginal;
}

double global_null_probability(const PartitionTree& tree, const MessageSet& m, const StateModel& model) {
    if (model.name() != "mrs" || m.states != 3)
        throw std::invalid_argument("global null probability needs the two-sample scanning model");
    if (m.xi_tilde.empty()) throw std::invalid_argument("posterior transitions have not been computed");
    const std::size_t nodes = tree.size();
    // psi(A): probability that no internal node in A's subtree is decoupled, given V(A^p) = 1.
    std::vector<double> psi(nodes, 1.0);
    auto children_product = [&](int id) {
        double p = 1.0;
        if (!tree.is_leaf(tree.left(id))) p *= psi[tree.left(id)];
        if (!tree.is_leaf(tree.right(id))) p *= psi[tree.right(id)];
        return p;
    };
    for (std::size_t k = nodes; k-- > 1;) {
        const int id = static_cast<int>(k);
        if (tree.is_leaf(id)) continue;
        const auto xt = m.xi_tilde_of(id);
        psi[id] = xt[1 * 3 + 1] * children_product(id) + xt[1 * 3 + 2];
    }
    if (tree.is_leaf(0)) return 1.0;
    const auto g = m.gamma_of(0);
    return g[1] * children_product(0) + g[2];
}

MapResult map_tree(std::span<const std::shared_ptr<const PartitionTree>> trees, const TreePriorConfig& prior,
                   const StateModel& model) {
    if (trees.empty()) throw std::invalid_argument("map_tree: empty population");
    MapResult out;
    out.scores.resize(trees.size());
    std::map<const PartitionTree*, double> seen;
    for (std::size_t m = 0; m < trees.size(); ++m) {
        const auto* t = trees[m].get();
        auto it = seen.find(t);
        if (it == seen.end()) {
            it = seen.emplace(t, log_tree_prior(*t, prior) + tree_log_marginal(*t, model)).first;
        }
        out.scores[m] = it->second;
        if (out.scores[m] > out.scores[out.index]) out.index = m;
    }
    return out;
}

nlohmann::ordered_json messages_to_json(const PartitionTree& tree, const MessageSet& m) {
    nlohmann::ordered_json j;
    j["log_marginal"] = m.log_marginal;
    auto nodes = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < tree.size(); ++k) {
        const int id = static_cast<int>(k);
        nlohmann::ordered_json n;
        n["id"] = id;
        const auto g = m.gamma_of(id);
        const auto p = m.phi_of(id);
        n["gamma_tilde"] = std::vector<double>(g.begin(), g.end());
        n["log_phi"] = std::vector<double>(p.begin(), p.end());
        n["pmap"] = m.pmap(id);
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    return j;
}

} // namespace hmpt
