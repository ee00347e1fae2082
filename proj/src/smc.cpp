#include "hmpt/smc.hpp"

#include "hmpt/message_passing.hpp"
#include "hmpt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace hmpt {

namespace {

constexpr std::uint64_t kResampleSlot = ~std::uint64_t{0};

}  // namespace

void validate(const SmcConfig& cfg) {
    if (cfg.particles == 0) throw std::invalid_argument("particles must be positive");
    if (!(cfg.kappa > 0.0 && cfg.kappa <= 1.0)) throw std::invalid_argument("kappa must lie in (0, 1]");
    if (!(cfg.ess_fraction >= 0.0 && cfg.ess_fraction <= 1.0))
        throw std::invalid_argument("ess_fraction must lie in [0, 1]");
    if (cfg.stop.max_depth < 0) throw std::invalid_argument("max_depth must be nonnegative");
}

CandidateCounts count_candidates(const Rect& rect, std::span<const std::uint32_t> indices, const Dataset& data,
                                 int grid) {
    CandidateCounts cc;
    cc.dim = data.dim();
    cc.grid = grid;
    cc.groups = data.groups();
    const std::size_t d = cc.dim;
    const std::size_t G = cc.groups;
    const std::size_t L = grid - 1;
    cc.total.assign(G, 0);
    cc.valid.assign(d * L, 0);
    // hist[(j * grid + b - 1) * G + g]: points whose smallest covering cut index is b.
    std::vector<std::uint32_t> hist(d * grid * G, 0);
    std::vector<double> cuts(d * (grid + 1));
    for (std::size_t j = 0; j < d; ++j) {
        const double a = rect.lower[j];
        const double b = rect.upper[j];
        for (int l = 0; l <= grid; ++l) cuts[j * (grid + 1) + l] = l == grid ? b : cut_point(a, b, l, grid);
        for (int l = 1; l < grid; ++l) {
            const double c = cuts[j * (grid + 1) + l];
            cc.valid[j * L + l - 1] = (a < c && c < b) ? 1 : 0;
        }
    }
    for (auto i : indices) {
        const std::size_t g = data.group(i);
        ++cc.total[g];
        for (std::size_t j = 0; j < d; ++j) {
            const double x = data.coord(i, j);
            const double a = rect.lower[j];
            const double w = rect.upper[j] - a;
            const double* cut = cuts.data() + j * (grid + 1);
            int b = static_cast<int>(std::ceil((x - a) / w * grid));
            b = std::clamp(b, 1, grid);
            while (b > 1 && x <= cut[b - 1]) --b;
            while (b < grid && x > cut[b]) ++b;
            ++hist[(j * grid + b - 1) * G + g];
        }
    }
    cc.left.assign(d * L * G, 0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t g = 0; g < G; ++g) {
            std::uint32_t run = 0;
            for (int l = 1; l < grid; ++l) {
                run += hist[(j * grid + l - 1) * G + g];
                cc.left[(j * L + l - 1) * G + g] = run;
            }
        }
    }
    return cc;
}

std::vector<double> log_state_prior(const StateModel& model, int depth, std::span<const double> parent_log_phi) {
    const int n = model.num_states();
    std::vector<double> out(n);
    if (parent_log_phi.empty()) {
        const auto init = model.initial();
        for (int i = 0; i < n; ++i) out[i] = init[i] > 0.0 ? std::log(init[i]) : kNegInf;
        return out;
    }
    std::vector<double> xi(n * n);
    model.transition(depth, xi);
    std::vector<double> terms(n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            const double x = xi[k * n + i];
            terms[k] = x > 0.0 ? parent_log_phi[k] + std::log(x) : kNegInf;
        }
        out[i] = log_sum_exp(terms);
    }
    return out;
}

double compute_log_h(const StateModel& model, std::span<const double> state_prior, const SplitCounts& counts,
                     const SplitContext& ctx, std::span<double> log_m) {
    model.log_marginals(counts, ctx, log_m);
    const int n = model.num_states();
    double hi = kNegInf;
    for (int i = 0; i < n; ++i) hi = std::max(hi, state_prior[i] + log_m[i]);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::exp(state_prior[i] + log_m[i] - hi);
    const double m = ctx.left_fraction();
    const double nl = static_cast<double>(counts.total_left());
    const double nr = static_cast<double>(counts.total_right());
    double volume = 0.0;
    if (nl > 0) volume -= nl * std::log(m);
    if (nr > 0) volume -= nr * std::log1p(-m);
    return hi + std::log(acc) + volume;
}

std::vector<double> update_phi(std::span<const double> state_prior, std::span<const double> log_m) {
    std::vector<double> out(state_prior.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = state_prior[i] + log_m[i];
    const double z = log_sum_exp(out);
    for (double& v : out) v -= z;
    return out;
}

ProposalTable build_proposal(const PartitionTree& tree, int node, const Dataset& data, const TreePriorConfig& prior,
                             const StateModel& model) {
    const auto& leaf = tree.active(node);
    const int grid = tree.grid();
    const std::size_t d = tree.dim();
    const std::size_t L = grid - 1;
    const int depth = tree.depth(node);
    const int p = tree.parent(node);

    ProposalTable t;
    t.dim = d;
    t.grid = grid;
    t.state_prior = log_state_prior(model, depth, p < 0 ? std::span<const double>{} : tree.log_phi(p));

    const CandidateCounts cc = count_candidates(leaf.rect, leaf.indices, data, grid);
    const auto log_lambda = log_dim_weights(prior, d);
    const auto log_beta = log_location_weights(tree.total(node), prior);

    const std::size_t G = cc.groups;
    std::vector<std::uint32_t> right(G);
    std::vector<double> log_m(model.num_states());
    t.log_h.assign(d * L, kNegInf);
    t.log_joint.assign(d * L, kNegInf);
    t.log_dim.assign(d, kNegInf);
    t.log_loc.assign(d * L, kNegInf);
    for (std::size_t j = 0; j < d; ++j) {
        for (int l = 1; l < grid; ++l) {
            const std::size_t k = j * L + l - 1;
            if (!cc.valid[k]) continue;
            const auto left = cc.left_at(j, l);
            for (std::size_t g = 0; g < G; ++g) right[g] = cc.total[g] - left[g];
            const SplitCounts counts{left, right};
            t.log_h[k] = compute_log_h(model, t.state_prior, counts, SplitContext{depth, l, grid}, log_m);
            t.log_joint[k] = log_lambda[j] + log_beta[l - 1] + t.log_h[k];
        }
        const std::span<const double> row(t.log_joint.data() + j * L, L);
        const double zj = log_sum_exp(row);
        t.log_dim[j] = zj;
        if (zj != kNegInf) {
            for (std::size_t l = 0; l < L; ++l) t.log_loc[j * L + l] = row[l] - zj;
        }
    }
    t.log_weight = log_sum_exp(t.log_joint);
    if (t.log_weight != kNegInf) {
        for (double& v : t.log_dim) v -= t.log_weight;
    }
    return t;
}

StepRecord smc_step_particle(PartitionTree& tree, const Dataset& data, const TreePriorConfig& prior,
                             const StateModel& model, StreamRng& rng) {
    StepRecord rec;
    const auto next = tree.next_node_to_divide();
    if (!next) return rec;
    const int node = *next;
    const ProposalTable t = build_proposal(tree, node, data, prior, model);
    if (t.log_weight == kNegInf) {
        // No cut is representable in floating point; the node is left undivided.
        tree.terminate(node);
        return rec;
    }
    const int grid = tree.grid();
    const std::size_t d = tree.dim();
    const std::size_t L = grid - 1;
    const auto log_lambda = log_dim_weights(prior, d);
    const int p = tree.parent(node);
    const bool parent_refixed = p >= 0 && tree.decision(p).refix;

    Decision dec;
    std::size_t chosen = 0;
    if (!prior.spike) {
        chosen = sample_log_categorical(t.log_joint, rng);
        dec = Decision{static_cast<int>(chosen / L), static_cast<int>(chosen % L) + 1, false};
        rec.log_increment = t.log_weight;
        rec.log_prior = log_lambda[dec.dim] + log_location_weights(tree.total(node), prior)[dec.loc - 1];
        rec.log_proposal = t.log_joint[chosen] - t.log_weight;
    } else {
        const int mid = grid / 2;
        const auto sw = spike_weights(tree.total(node), parent_refixed, prior);
        std::vector<double> fixed(d);
        for (std::size_t j = 0; j < d; ++j) fixed[j] = log_lambda[j] + t.log_h[t.index(j, mid)];
        std::vector<double> slab(d * L, kNegInf);
        for (std::size_t j = 0; j < d; ++j) {
            for (int l = 1; l < grid; ++l) {
                if (l != mid) slab[t.index(j, l)] = log_lambda[j] + sw.log_slab[l - 1] + t.log_h[t.index(j, l)];
            }
        }
        const double a1 = sw.log_refix + log_sum_exp(fixed);
        const double a0 = sw.log_no_refix == kNegInf ? kNegInf : sw.log_no_refix + log_sum_exp(slab);
        const double w = log_add_exp(a0, a1);
        if (w == kNegInf) {
            tree.terminate(node);
            return rec;
        }
        const bool refix = a0 == kNegInf || (a1 != kNegInf && rng.uniform() < std::exp(a1 - w));
        if (refix) {
            const std::size_t j = sample_log_categorical(fixed, rng);
            dec = Decision{static_cast<int>(j), mid, true};
            chosen = t.index(j, mid);
            rec.log_prior = log_lambda[j] + sw.log_refix;
            rec.log_proposal = sw.log_refix + fixed[j] - w;
        } else {
            chosen = sample_log_categorical(slab, rng);
            dec = Decision{static_cast<int>(chosen / L), static_cast<int>(chosen % L) + 1, false};
            rec.log_prior = log_lambda[dec.dim] + sw.log_no_refix + sw.log_slab[dec.loc - 1];
            rec.log_proposal = sw.log_no_refix + slab[chosen] - w;
        }
        rec.log_increment = w;
    }
    rec.log_h = t.log_h[chosen];
    rec.decision = dec;
    rec.divided = true;

    const auto [l, r] = tree.apply_decision(node, dec, data);
    std::vector<double> log_m(model.num_states());
    model.log_marginals(SplitCounts{tree.counts(l), tree.counts(r)}, SplitContext{tree.depth(node), dec.loc, grid},
                        log_m);
    tree.set_log_phi(node, update_phi(t.state_prior, log_m));
    return rec;
}

double ess(std::span<const double> weights) {
    double s = 0.0;
    double s2 = 0.0;
    for (double w : weights) {
        s += w;
        s2 += w * w;
    }
    return s2 > 0.0 ? s * s / s2 : 0.0;
}

std::vector<std::size_t> systematic_resample(std::span<const double> log_weights, double kappa, double u) {
    const std::size_t M = log_weights.size();
    std::vector<double> tempered(M);
    for (std::size_t m = 0; m < M; ++m) tempered[m] = kappa * log_weights[m];
    std::vector<double> a(M);
    normalize_log_weights(tempered, a);
    std::vector<std::size_t> out(M);
    double cum = a[0];
    std::size_t k = 0;
    for (std::size_t m = 0; m < M; ++m) {
        const double target = (static_cast<double>(m) + u) / static_cast<double>(M);
        while (target > cum && k + 1 < M) cum += a[++k];
        out[m] = k;
    }
    return out;
}

std::vector<double> particle_weights(const std::vector<Particle>& particles) {
    std::vector<double> lw(particles.size());
    for (std::size_t m = 0; m < particles.size(); ++m) lw[m] = particles[m].log_weight;
    std::vector<double> w(particles.size());
    normalize_log_weights(lw, w);
    return w;
}

namespace {

void renormalize(std::vector<Particle>& ps) {
    std::vector<double> lw(ps.size());
    for (std::size_t m = 0; m < ps.size(); ++m) lw[m] = ps[m].log_weight;
    const double z = log_sum_exp(lw);
    if (!std::isfinite(z)) throw std::domain_error("particle weights collapsed to zero");
    for (auto& p : ps) p.log_weight -= z;
}

}  // namespace

SmcResult run_smc(const Dataset& data, StateModel& model, const TreePriorConfig& prior, const SmcConfig& cfg,
                  const StepCallback& on_step) {
    validate(cfg);
    validate(prior, data.dim());
    if (data.empty()) throw std::invalid_argument("dataset is empty");
    if (model.required_groups() != 0 && static_cast<std::size_t>(model.required_groups()) != data.groups())
        throw std::invalid_argument("model '" + model.name() + "' needs " + std::to_string(model.required_groups()) +
                                    " groups, data has " + std::to_string(data.groups()));
    model.prepare(ModelPrepare{data.size(), prior.grid, cfg.stop.max_depth});

    const std::size_t M = cfg.particles;
    SmcResult res;
    const auto root = std::make_shared<PartitionTree>(data, prior.grid, model.num_states(), cfg.stop);
    res.particles.resize(M);
    for (auto& p : res.particles) {
        p.tree = root;
        p.log_weight = -std::log(static_cast<double>(M));
    }

    ThreadPool pool(cfg.threads);
    std::vector<std::size_t> active;
    std::vector<double> lw(M);
    std::vector<double> w(M);
    std::size_t step = 0;
    for (;;) {
        active.clear();
        for (std::size_t m = 0; m < M; ++m) {
            if (res.particles[m].tree->active_count() > 0) active.push_back(m);
        }
        if (active.empty()) break;
        ++step;
        // Copy-on-write: a particle about to mutate a tree shared with others gets its own copy.
        std::unordered_map<const PartitionTree*, std::size_t> holders;
        for (const auto& p : res.particles) ++holders[p.tree.get()];
        std::vector<std::size_t> to_clone;
        for (std::size_t m : active) {
            auto& h = holders[res.particles[m].tree.get()];
            if (h > 1) {
                --h;
                to_clone.push_back(m);
            }
        }
        pool.parallel_for(to_clone.size(), [&](std::size_t k) {
            auto& p = res.particles[to_clone[k]];
            p.tree = std::make_shared<PartitionTree>(*p.tree);
        });
        pool.parallel_for(active.size(), [&](std::size_t k) {
            const std::size_t m = active[k];
            auto& p = res.particles[m];
            StreamRng rng(cfg.seed, step, m);
            const StepRecord r = smc_step_particle(*p.tree, data, prior, model, rng);
            p.log_weight += r.log_increment;
            p.sum_log_increment += r.log_increment;
            p.sum_log_prior += r.log_prior;
            p.sum_log_proposal += r.log_proposal;
            p.sum_log_h += r.log_h;
        });
        renormalize(res.particles);

        StepDiagnostics diag;
        diag.step = step;
        diag.active_particles = active.size();
        diag.min_log_weight = diag.max_log_weight = res.particles[0].log_weight;
        for (std::size_t m = 0; m < M; ++m) {
            lw[m] = res.particles[m].log_weight;
            w[m] = std::exp(lw[m]);
            diag.min_log_weight = std::min(diag.min_log_weight, lw[m]);
            diag.max_log_weight = std::max(diag.max_log_weight, lw[m]);
            res.peak_nodes = std::max(res.peak_nodes, res.particles[m].tree->size());
        }
        diag.ess = ess(w);
        if (diag.ess < cfg.ess_fraction * static_cast<double>(M)) {
            StreamRng rng(cfg.seed, step, kResampleSlot);
            const auto anc = systematic_resample(lw, cfg.kappa, rng.uniform());
            std::vector<Particle> next(M);
            for (std::size_t m = 0; m < M; ++m) {
                next[m] = res.particles[anc[m]];
                next[m].log_weight = (1.0 - cfg.kappa) * lw[anc[m]];
            }
            res.particles = std::move(next);
            renormalize(res.particles);
            diag.resampled = true;
            ++res.resamples;
        }
        res.diagnostics.push_back(diag);
        if (on_step) on_step(diag);
    }
    res.steps = step;

    if (cfg.exact_final_weights && model.num_states() > 1) {
        std::unordered_map<const PartitionTree*, double> lml;
        for (const auto& p : res.particles) lml.emplace(p.tree.get(), 0.0);
        std::vector<const PartitionTree*> uniq;
        for (const auto& [t, v] : lml) uniq.push_back(t);
        std::sort(uniq.begin(), uniq.end(), [&](auto* a, auto* b) { return a < b; });
        std::vector<double> vals(uniq.size());
        pool.parallel_for(uniq.size(), [&](std::size_t k) { vals[k] = tree_log_marginal(*uniq[k], model); });
        for (std::size_t k = 0; k < uniq.size(); ++k) lml[uniq[k]] = vals[k];
        for (auto& p : res.particles) {
            p.final_correction = lml[p.tree.get()] - p.sum_log_h;
            p.log_weight += p.final_correction;
        }
        renormalize(res.particles);
    }
    return res;
}

} // namespace hmpt
