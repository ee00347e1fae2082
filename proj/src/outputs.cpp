#include "hmpt/outputs.hpp"

#include "hmpt/numeric.hpp"
#include "hmpt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hmpt {

PredictiveMasses predictive_masses(const PartitionTree& tree, const MessageSet& msgs, const StateModel& model,
                                   int group) {
    const int n = msgs.states;
    if (msgs.gamma.empty()) throw std::invalid_argument("predictive masses need the downward pass");
    PredictiveMasses out;
    out.states = n;
    out.e.assign(tree.size() * n, 0.0);
    out.mass.assign(tree.size(), 0.0);
    std::copy(msgs.gamma.begin(), msgs.gamma.begin() + n, out.e.begin());
    out.mass[0] = 1.0;
    std::vector<double> carry(n);
    for (std::size_t k = 0; k < tree.size(); ++k) {
        const int id = static_cast<int>(k);
        if (tree.is_leaf(id)) continue;
        const int l = tree.left(id);
        const int r = tree.right(id);
        const SplitCounts counts{tree.counts(l), tree.counts(r)};
        const SplitContext ctx{tree.depth(id), tree.decision(id).loc, tree.grid()};
        const double* ep = out.e.data() + id * n;
        for (int side = 0; side < 2; ++side) {
            const int child = side == 0 ? l : r;
            for (int i = 0; i < n; ++i) {
                const double theta = model.expected_theta(i, group, counts, ctx);
                carry[i] = (side == 0 ? theta : 1.0 - theta) * ep[i];
            }
            const auto xt = msgs.xi_tilde_of(child);
            double total = 0.0;
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += xt[i * n + j] * carry[i];
                out.e[child * n + j] = s;
                total += s;
            }
            out.mass[child] = total;
        }
    }
    return out;
}

PosteriorCache::PosteriorCache(const Posterior& post, int group, int threads) : post_(post) {
    if (!post.model) throw std::invalid_argument("posterior has no model");
    if (post.trees.size() != post.weights.size()) throw std::invalid_argument("posterior trees/weights mismatch");
    std::map<const PartitionTree*, std::size_t> index;
    slot_.resize(post.trees.size());
    for (std::size_t m = 0; m < post.trees.size(); ++m) {
        const auto* t = post.trees[m].get();
        auto [it, fresh] = index.emplace(t, unique_.size());
        if (fresh) {
            unique_.push_back(t);
            weight_.push_back(0.0);
        }
        slot_[m] = it->second;
        weight_[it->second] += post.weights[m];
    }
    msgs_.resize(unique_.size());
    masses_.resize(unique_.size());
    ThreadPool pool(threads);
    pool.parallel_for(unique_.size(), [&](std::size_t s) {
        msgs_[s] = compute_messages(*unique_[s], *post.model);
        masses_[s] = predictive_masses(*unique_[s], msgs_[s], *post.model, group);
    });
}

std::vector<double> predictive_density(const PosteriorCache& cache, std::span<const double> points) {
    if (cache.distinct() == 0) throw std::invalid_argument("empty posterior");
    const std::size_t d = cache.tree(0).dim();
    if (points.size() % d != 0) throw std::invalid_argument("points do not have d columns");
    const std::size_t n = points.size() / d;
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = points.subspan(i * d, d);
        for (double v : x) {
            if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("density query point outside (0,1]^d");
        }
    }
    for (std::size_t s = 0; s < cache.distinct(); ++s) {
        const auto& tree = cache.tree(s);
        const auto& mass = cache.masses(s).mass;
        const double w = cache.weight(s);
        for (std::size_t i = 0; i < n; ++i) {
            const int leaf = tree.find_leaf(points.subspan(i * d, d));
            out[i] += w * std::exp(std::log(mass[leaf]) - tree.log_volume(leaf));
        }
    }
    return out;
}

double predictive_score(const PosteriorCache& cache, std::span<const double> points) {
    const auto dens = predictive_density(cache, points);
    if (dens.empty()) throw std::invalid_argument("score needs at least one test point");
    double total = 0.0;
    for (double v : dens) {
        if (!(v > 0.0)) throw std::domain_error("predictive density is zero at a test point");
        total += std::log(v);
    }
    return total / static_cast<double>(dens.size());
}

double effect_size(const PartitionTree& tree, int node, const MessageSet& msgs, const StateModel& model,
                   const EffectSizeOptions& opts) {
    if (model.name() != "mrs") throw std::invalid_argument("effect size needs the two-sample scanning model");
    if (tree.is_leaf(node)) throw std::invalid_argument("effect size is defined on internal nodes");
    if (opts.draws == 0) throw std::invalid_argument("effect size needs at least one draw");
    const double pmap = msgs.pmap(node);
    if (!opts.conditional && pmap == 0.0) return 0.0;
    const auto& mrs = static_cast<const MrsModel&>(model);
    const auto prior = mrs.prior(SplitContext{tree.depth(node), tree.decision(node).loc, tree.grid()});
    const auto nl = tree.counts(tree.left(node));
    const auto nr = tree.counts(tree.right(node));
    StreamRng rng(opts.seed, static_cast<std::uint64_t>(node), 0x45FFEC7ULL);
    double acc = 0.0;
    for (std::size_t k = 0; k < opts.draws; ++k) {
        const double t1 = sample_beta_logit(prior.alpha_left + nl[0], prior.alpha_right + nr[0], rng);
        const double t2 = sample_beta_logit(prior.alpha_left + nl[1], prior.alpha_right + nr[1], rng);
        acc += std::abs(t1 - t2);
    }
    const double mean = acc / static_cast<double>(opts.draws);
    return opts.conditional ? mean : pmap * mean;
}

double posterior_null_probability(const PosteriorCache& cache) {
    double p = 0.0;
    for (std::size_t s = 0; s < cache.distinct(); ++s) {
        p += cache.weight(s) * global_null_probability(cache.tree(s), cache.messages(s), *cache.posterior().model);
    }
    return std::clamp(p, 0.0, 1.0);
}

TwoSampleReport two_sample_report(const PosteriorCache& cache, std::size_t map_index, const ReportOptions& opts) {
    const auto& post = cache.posterior();
    if (map_index >= post.trees.size()) throw std::invalid_argument("MAP index out of range");
    TwoSampleReport rep;
    rep.p_h0 = posterior_null_probability(cache);
    rep.map_index = map_index;
    const std::size_t s = cache.slot(map_index);
    const auto& tree = cache.tree(s);
    const auto& msgs = cache.messages(s);
    for (int id : tree.internal_nodes()) {
        if (tree.total(id) < opts.min_node_count) continue;
        NodeReportRow row;
        row.node = id;
        row.depth = tree.depth(id);
        row.split_dim = tree.decision(id).dim;
        row.cut = tree.cut(id);
        const Rect r = tree.rect_of(id);
        row.lower = r.lower;
        row.upper = r.upper;
        row.counts.assign(tree.counts(id).begin(), tree.counts(id).end());
        row.pmap = msgs.pmap(id);
        row.effect_size = effect_size(tree, id, msgs, *post.model, opts.effect);
        rep.rows.push_back(std::move(row));
    }
    std::stable_sort(rep.rows.begin(), rep.rows.end(),
                     [](const NodeReportRow& a, const NodeReportRow& b) { return a.effect_size > b.effect_size; });
    return rep;
}

std::string report_rows_csv(const TwoSampleReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "node,depth,split_dim,cut,n1,n2,pmap,effect_size,lower,upper\n";
    auto join = [](const std::vector<double>& v) {
        std::ostringstream s;
        s.precision(17);
        for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ";" : "") << v[i];
        return s.str();
    };
    for (const auto& r : report.rows) {
        out << r.node << ',' << r.depth << ',' << r.split_dim << ',' << r.cut << ',' << r.counts.at(0) << ','
            << r.counts.at(1) << ',' << r.pmap << ',' << r.effect_size << ',' << join(r.lower) << ','
            << join(r.upper) << '\n';
    }
    return out.str();
}

nlohmann::ordered_json report_summary_json(const TwoSampleReport& report, std::size_t top_k) {
    nlohmann::ordered_json j;
    j["p_h0"] = report.p_h0;
    j["map_index"] = report.map_index;
    auto top = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < std::min(top_k, report.rows.size()); ++k) {
        const auto& r = report.rows[k];
        top.push_back({{"node", r.node},
                       {"depth", r.depth},
                       {"split_dim", r.split_dim},
                       {"cut", r.cut},
                       {"counts", r.counts},
                       {"pmap", r.pmap},
                       {"effect_size", r.effect_size},
                       {"lower", r.lower},
                       {"upper", r.upper}});
    }
    j["top_nodes"] = std::move(top);
    return j;
}

} // namespace hmpt
