// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: hmpt_acceptance [criterion numbers...]   (all when none given)

#include "hmpt/bundle.hpp"
#include "hmpt/config.hpp"
#include "hmpt/io.hpp"
#include "hmpt/message_passing.hpp"
#include "hmpt/models.hpp"
#include "hmpt/outputs.hpp"
#include "hmpt/smc.hpp"
#include "hmpt/tree.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace hmpt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ------------------------------------------------------------ oracle helpers

double lse(const std::vector<double>& v) {
    double m = -INFINITY;
    for (double x : v) m = std::max(m, x);
    if (m == -INFINITY) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// log B(a+nl, b+nr) - log B(a, b) straight from std::lgamma.
double bb(double a, double b, double nl, double nr) {
    return std::lgamma(a + nl) + std::lgamma(b + nr) - std::lgamma(a + b + nl + nr) -
           (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

// Per-state log marginal of a split, written from the model definitions.
std::vector<double> oracle_log_m(const StateModel& model, const std::vector<std::uint32_t>& l,
                                 const std::vector<std::uint32_t>& r, int depth, int loc, int grid) {
    const double m = static_cast<double>(loc) / grid;
    std::vector<double> out(model.num_states());
    if (const auto* pt = dynamic_cast<const PlainPtModel*>(&model)) {
        const double a = pt->alpha(depth);
        double s = 0.0;
        for (std::size_t g = 0; g < l.size(); ++g) s += bb(a, a, l[g], r[g]);
        out[0] = s;
    } else if (const auto* apt = dynamic_cast<const AptModel*>(&model)) {
        const int top = apt->num_states() - 1;
        for (int i = 0; i < top; ++i) {
            std::vector<double> t;
            for (double nu : apt->nu_grid(i)) t.push_back(bb(m * nu, (1 - m) * nu, l[0], r[0]));
            out[i] = lse(t) - std::log(static_cast<double>(t.size()));
        }
        out[top] = l[0] * std::log(m) + r[0] * std::log1p(-m);
    } else if (const auto* mrs = dynamic_cast<const MrsModel*>(&model)) {
        const double nu = mrs->options().nu0;
        out[0] = bb(nu * m, nu * (1 - m), l[0], r[0]) + bb(nu * m, nu * (1 - m), l[1], r[1]);
        out[1] = out[2] = bb(nu * m, nu * (1 - m), l[0] + l[1], r[0] + r[1]);
    }
    return out;
}

double oracle_log_prior(const PartitionTree& t, const TreePriorConfig& prior) {
    double s = 0.0;
    const double d = static_cast<double>(t.dim());
    for (int id : t.internal_nodes()) {
        const double n = static_cast<double>(t.total(id));
        std::vector<double> w;
        for (int l = 1; l < prior.grid; ++l)
            w.push_back(-prior.eta * n * std::fabs(static_cast<double>(l) / prior.grid - 0.5));
        s += -std::log(d) + w[t.decision(id).loc - 1] - lse(w);
    }
    return s;
}

std::string tree_key(const PartitionTree& t) {
    std::ostringstream o;
    for (int id : t.internal_nodes()) o << id << ':' << t.decision(id).dim << ':' << t.decision(id).loc << ' ';
    return o.str();
}

// Every tree the division queue can produce, by trying all decisions at each step.
void enumerate_trees(const PartitionTree& t, const Dataset& data, std::vector<PartitionTree>& out, std::size_t cap,
                     bool& truncated) {
    if (out.size() >= cap) {
        truncated = true;
        return;
    }
    const auto next = t.next_node_to_divide();
    if (!next) {
        out.push_back(t);
        return;
    }
    for (std::size_t j = 0; j < t.dim(); ++j) {
        for (int l = 1; l < t.grid(); ++l) {
            PartitionTree c = t;
            c.apply_decision(*next, Decision{static_cast<int>(j), l, false}, data);
            enumerate_trees(c, data, out, cap, truncated);
        }
    }
}

double rel_err(double a, double b) {
    if (b == 0.0) return a == 0.0 ? 0.0 : INFINITY;
    return std::fabs(a - b) / std::fabs(b);
}

Dataset to_dataset(const Simulated& sim, const std::string& mode, Scaling* scaling_out = nullptr) {
    std::vector<std::vector<double>> pooled;
    for (const auto& g : sim.groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const Scaling s = fit_scaling(pooled, mode);
    std::vector<std::vector<std::vector<double>>> groups;
    for (const auto& g : sim.groups) {
        groups.emplace_back();
        for (const auto& x : g) groups.back().push_back(s.apply(x));
    }
    if (scaling_out) *scaling_out = s;
    return Dataset::from_groups(groups);
}

// ------------------------------------------------------------ criterion 1

Outcome c1_exact_inference() {
    double worst = 0.0;
    std::size_t trees_checked = 0;
    double prior_sum_err = 0.0;
    std::size_t complete = 0;
    for (int inst = 0; inst < 50; ++inst) {
        std::mt19937_64 rng(1000 + inst);
        auto pick = [&](int k) { return static_cast<int>(rng() % k); };
        const std::size_t d = 1 + pick(2);
        const int grid = pick(2) ? 2 : 4;
        const int K = 1 + pick(3);
        const int kind = pick(4);  // pt, apt(2), apt(3), mrs
        const std::size_t n = 1 + pick(12);
        const std::size_t min_count = 1 + pick(3);
        std::unique_ptr<StateModel> model;
        if (kind == 0) model = std::make_unique<PlainPtModel>();
        if (kind == 1 || kind == 2) {
            AptOptions o;
            o.states = kind + 1;
            model = std::make_unique<AptModel>(o);
        }
        if (kind == 3) model = std::make_unique<MrsModel>();
        const std::size_t G = kind == 3 ? 2 : 1;
        const int I = model->num_states();

        Dataset data(d, G);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> x(d);
            for (auto& v : x) {
                const double w = u(rng);
                // Some coordinates sit exactly on grid cuts, some cluster low.
                v = w < 0.2 ? 0.25 * (1 + pick(3)) : (w < 0.5 ? 0.3 * u(rng) + 1e-9 : 1.0 - u(rng));
            }
            data.add(x, static_cast<int>(G == 2 ? pick(2) : 0));
        }
        model->prepare({n, grid, K});
        TreePriorConfig prior;
        prior.grid = grid;
        prior.eta = 0.05;

        std::vector<PartitionTree> trees;
        bool truncated = false;
        enumerate_trees(PartitionTree(data, grid, I, StopConfig{K, min_count}), data, trees, 20000, truncated);
        if (!truncated) {
            ++complete;
            std::vector<double> lp;
            for (const auto& t : trees) lp.push_back(log_tree_prior(t, prior));
            prior_sum_err = std::max(prior_sum_err, std::fabs(std::exp(lse(lp)) - 1.0));
        }
        const std::size_t stride = std::max<std::size_t>(1, trees.size() / 150);
        for (std::size_t k = 0; k < trees.size(); k += stride) {
            const PartitionTree& t = trees[k];
            ++trees_checked;
            const auto msgs = compute_messages(t, *model);
            const auto internal = t.internal_nodes();
            const std::size_t q = internal.size();
            double leaf_term = 0.0;
            for (int id : t.leaves()) leaf_term += -static_cast<double>(t.total(id)) * t.log_volume(id);
            std::vector<std::vector<double>> lm(t.size());
            for (int id : internal) {
                const auto l = t.counts(t.left(id));
                const auto r = t.counts(t.right(id));
                lm[id] = oracle_log_m(*model, {l.begin(), l.end()}, {r.begin(), r.end()}, t.depth(id),
                                      t.decision(id).loc, grid);
            }
            // Joint over internal-node states for a given root prior row.
            auto joint = [&](const std::vector<double>& root_row, std::vector<double>& logp,
                             std::vector<std::vector<int>>& states) {
                std::size_t total = 1;
                for (std::size_t i = 0; i < q; ++i) total *= I;
                logp.assign(total, 0.0);
                states.assign(total, std::vector<int>(t.size(), -1));
                for (std::size_t c = 0; c < total; ++c) {
                    std::size_t code = c;
                    auto& v = states[c];
                    for (int id : internal) {
                        v[id] = static_cast<int>(code % I);
                        code /= I;
                    }
                    double s = leaf_term;
                    for (int id : internal) {
                        double pr;
                        if (id == 0) {
                            pr = root_row[v[0]];
                        } else {
                            pr = model->transition(t.depth(id))[v[t.parent(id)] * I + v[id]];
                        }
                        s += (pr > 0 ? std::log(pr) : -INFINITY) + lm[id][v[id]];
                    }
                    logp[c] = s;
                }
            };
            std::vector<double> logp;
            std::vector<std::vector<int>> states;
            if (q == 0) {
                worst = std::max(worst, std::fabs(msgs.log_marginal - leaf_term) / std::max(1.0, std::fabs(leaf_term)));
                continue;
            }
            joint(model->initial(), logp, states);
            const double logZ = lse(logp);
            worst = std::max(worst, std::fabs(msgs.log_marginal - logZ) / std::max(1.0, std::fabs(logZ)));
            std::vector<double> p(logp.size());
            for (std::size_t c = 0; c < p.size(); ++c) p[c] = std::exp(logp[c] - logZ);

            // gamma and xi_tilde at internal nodes
            std::vector<std::vector<double>> gam(t.size(), std::vector<double>(I, 0.0));
            for (int id : internal) {
                std::vector<double> pair(I * I, 0.0);
                for (std::size_t c = 0; c < p.size(); ++c) {
                    gam[id][states[c][id]] += p[c];
                    if (id != 0) pair[states[c][t.parent(id)] * I + states[c][id]] += p[c];
                }
                for (int i = 0; i < I; ++i) worst = std::max(worst, rel_err(msgs.gamma_of(id)[i], gam[id][i]));
                if (id == 0) continue;
                for (int i = 0; i < I; ++i) {
                    double row = 0.0;
                    for (int j = 0; j < I; ++j) row += pair[i * I + j];
                    if (row == 0.0) continue;  // parent state impossible a posteriori
                    for (int j = 0; j < I; ++j)
                        worst = std::max(worst, rel_err(msgs.xi_tilde_of(id)[i * I + j], pair[i * I + j] / row));
                }
            }
            // Root xi_tilde: the root posterior when its prior is row i of xi(root).
            const auto xi0 = model->transition(0);
            for (int i = 0; i < I; ++i) {
                std::vector<double> row(xi0.begin() + i * I, xi0.begin() + (i + 1) * I);
                std::vector<double> lp2;
                std::vector<std::vector<int>> st2;
                joint(row, lp2, st2);
                const double z = lse(lp2);
                std::vector<double> post(I, 0.0);
                for (std::size_t c = 0; c < lp2.size(); ++c) post[st2[c][0]] += std::exp(lp2[c] - z);
                for (int j = 0; j < I; ++j) worst = std::max(worst, rel_err(msgs.xi_tilde_of(0)[i * I + j], post[j]));
            }
            // Leaves: state depends on the data only through the parent.
            for (int id : t.leaves()) {
                if (id == 0) continue;
                const auto xi = model->transition(t.depth(id));
                const auto& gp = gam[t.parent(id)];
                for (int j = 0; j < I; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < I; ++i) s += gp[i] * xi[i * I + j];
                    worst = std::max(worst, rel_err(msgs.gamma_of(id)[j], s));
                }
            }
            if (model->name() == "mrs") {
                double null = 0.0;
                for (std::size_t c = 0; c < p.size(); ++c) {
                    bool any = false;
                    for (int id : internal) any = any || states[c][id] == 0;
                    if (!any) null += p[c];
                }
                worst = std::max(worst, rel_err(global_null_probability(t, msgs, *model), null));
            }
        }
    }
    Outcome o;
    o.pass = worst <= 1e-10 && prior_sum_err <= 1e-10;
    o.detail = "50 instances, " + std::to_string(trees_checked) + " trees, max rel err " + fmt("%.2e", worst) +
               "; prior mass over " + std::to_string(complete) + " complete enumerations off by " +
               fmt("%.2e", prior_sum_err);
    return o;
}

// ------------------------------------------------------------ criterion 2

struct C2Case {
    const char* name;
    int grid;
    int K;
    std::size_t min_count;
    int apt_states;  // 0 means plain PT
};

Outcome c2_smc_correctness() {
    const std::vector<double> xs = {0.05, 0.12, 0.18, 0.22, 0.4, 0.61, 0.77, 0.93};
    const C2Case cases[] = {{"N_L=2,K=2,I=1", 2, 2, 5, 0},
                            {"N_L=4,K=2,I=1,min_count=2", 4, 2, 2, 0},
                            {"N_L=4,K=3,I=2,min_count=2", 4, 3, 2, 2}};
    bool pass = true;
    std::string detail;
    for (const auto& cs : cases) {
        Dataset data(1, 1);
        for (double x : xs) data.add(std::vector<double>{x}, 0);
        std::unique_ptr<StateModel> model;
        if (cs.apt_states == 0) {
            model = std::make_unique<PlainPtModel>();
        } else {
            AptOptions o;
            o.states = cs.apt_states;
            model = std::make_unique<AptModel>(o);
        }
        TreePriorConfig prior;
        prior.grid = cs.grid;
        SmcConfig cfg;
        cfg.particles = 10000;
        cfg.stop = StopConfig{cs.K, cs.min_count};
        cfg.seed = 11;
        cfg.threads = 1;
        const auto res = run_smc(data, *model, prior, cfg);

        // Exact posterior over the enumerated tree space.
        std::vector<PartitionTree> trees;
        bool truncated = false;
        enumerate_trees(PartitionTree(data, cs.grid, model->num_states(), cfg.stop), data, trees, 100000, truncated);
        std::vector<double> score;
        for (const auto& t : trees) {
            double lm = 0.0;
            if (cs.apt_states == 0) {
                for (int id : t.internal_nodes()) {
                    const auto l = t.counts(t.left(id));
                    const auto r = t.counts(t.right(id));
                    lm += oracle_log_m(*model, {l.begin(), l.end()}, {r.begin(), r.end()}, t.depth(id),
                                       t.decision(id).loc, cs.grid)[0];
                }
                for (int id : t.leaves()) lm -= static_cast<double>(t.total(id)) * t.log_volume(id);
            } else {
                lm = tree_log_marginal(t, *model);
            }
            score.push_back(oracle_log_prior(t, prior) + lm);
        }
        const double z = lse(score);
        std::map<std::string, double> exact;
        for (std::size_t k = 0; k < trees.size(); ++k) exact[tree_key(trees[k])] += std::exp(score[k] - z);

        std::map<std::string, double> est;
        const auto w = particle_weights(res.particles);
        double id_err = 0.0;
        double prior_err = 0.0;
        for (std::size_t m = 0; m < res.particles.size(); ++m) {
            const auto& p = res.particles[m];
            est[tree_key(*p.tree)] += w[m];
            const double lhs = p.sum_log_increment + p.final_correction;
            const double rhs = log_tree_prior(*p.tree, prior) + tree_log_marginal(*p.tree, *model) - p.sum_log_proposal;
            id_err = std::max(id_err, std::fabs(lhs - rhs));
            prior_err = std::max(prior_err, std::fabs(p.sum_log_prior - oracle_log_prior(*p.tree, prior)));
        }
        double dev = 0.0;
        for (const auto& [k, v] : exact) dev = std::max(dev, std::fabs(v - est[k]));
        for (const auto& [k, v] : est) {
            if (!exact.count(k)) dev = std::max(dev, v);
        }
        const bool ok = !truncated && dev <= 0.02 && id_err <= 1e-8 && prior_err <= 1e-8;
        pass = pass && ok;
        detail += std::string(detail.empty() ? "" : "; ") + cs.name + ": " + std::to_string(trees.size()) +
                  " trees, max|p-p*| " + fmt("%.4f", dev) + ", identity err " + fmt("%.1e", id_err);
    }
    return {pass, detail};
}

// ------------------------------------------------------------ criterion 3

Outcome c3_conjugacy() {
    using boost::math::quadrature::tanh_sinh;
    tanh_sinh<double> integrator;
    // integral of t^(p-1) (1-t)^(q-1) relative to its peak, plus the log of that peak.
    auto log_beta_integral = [&](double p, double q) {
        const double mode = (p > 1 && q > 1) ? (p - 1) / (p + q - 2) : 0.5;
        const double shift = (p - 1) * std::log(mode) + (q - 1) * std::log1p(-mode);
        auto f = [&](double t, double tc) {
            // tc is the distance to the nearer endpoint, which keeps 1-t accurate near 1.
            const double lt = t <= 0.5 ? std::log(t) : std::log1p(-tc);
            const double l1 = t <= 0.5 ? std::log1p(-t) : std::log(tc);
            return std::exp((p - 1) * lt + (q - 1) * l1 - shift);
        };
        const double v = integrator.integrate(f, 0.0, 1.0, 1e-15);
        return std::log(v) + shift;
    };
    const double alphas[] = {0.1, 0.5, 1.0, 3.0, 10.0};
    const std::pair<int, int> counts[] = {{0, 0}, {1, 3}, {7, 2}, {25, 40}};
    double worst = 0.0;
    int cases = 0;
    for (double a : alphas) {
        for (double b : alphas) {
            for (auto [nl, nr] : counts) {
                const double want = log_beta_integral(a + nl, b + nr) - log_beta_integral(a, b);
                const double got = beta_binomial_log_marginal({a, b}, nl, nr);
                worst = std::max(worst, std::fabs(std::exp(got - want) - 1.0));
                ++cases;
            }
        }
    }
    return {worst <= 1e-9 && cases == 100,
            std::to_string(cases) + " cases, max relative error " + fmt("%.2e", worst)};
}

// ------------------------------------------------------------ criterion 4

Outcome c4_mass_conservation() {
    double worst = 0.0;
    std::size_t fits = 0;
    std::size_t trees = 0;
    for (const auto& sc : scenario_names()) {
        const bool two = scenario_is_two_sample(sc);
        const std::size_t dim = sc == "beta-mixture" ? 4 : (two ? 10 : 0);
        const auto sim = simulate(sc, two ? 300 : 500, two ? 300 : 0, dim, 5);
        const Dataset data = to_dataset(sim, "affine");
        RunConfig cfg = default_config(two);
        cfg.smc.particles = 100;
        cfg.smc.threads = 1;
        const FitOutput fo = fit(data, cfg);
        ++fits;
        for (int g = 0; g < static_cast<int>(data.groups()); ++g) {
            PosteriorCache cache(fo.posterior, g, 1);
            for (std::size_t s = 0; s < cache.distinct(); ++s) {
                const auto& t = cache.tree(s);
                const auto& pm = cache.masses(s);
                double sum = 0.0;
                for (int id : t.leaves()) sum += pm.mass[id];
                double root = 0.0;
                for (int i = 0; i < pm.states; ++i) root += pm.e[i];
                worst = std::max({worst, std::fabs(sum - 1.0), std::fabs(root - 1.0)});
                ++trees;
            }
        }
    }
    return {worst <= 1e-10, std::to_string(fits) + " scenario fits, " + std::to_string(trees) +
                                " tree/group pairs, max |sum - 1| " + fmt("%.2e", worst)};
}

// ------------------------------------------------------------ criterion 5

Outcome c5_concentration() {
    double total = 0.0;
    double lo = 1.0;
    for (int seed = 1; seed <= 10; ++seed) {
        const auto sim = simulate("step", 5000, 0, 1, seed);
        const Dataset data = Dataset::from_groups(sim.groups);
        RunConfig cfg = default_config(false);
        cfg.prior.grid = 4;
        cfg.smc.seed = seed;
        const FitOutput fo = fit(data, cfg);
        double share = 0.0;
        for (std::size_t m = 0; m < fo.posterior.trees.size(); ++m) {
            const auto& t = *fo.posterior.trees[m];
            if (!t.is_leaf(0) && t.decision(0).dim == 0 && t.decision(0).loc == 1) share += fo.posterior.weights[m];
        }
        total += share;
        lo = std::min(lo, share);
    }
    const double mean = total / 10.0;
    return {mean > 0.9, "mean root-cut-at-0.25 share " + fmt("%.4f", mean) + " over 10 seeds (min " + fmt("%.4f", lo) +
                            ")"};
}

// ------------------------------------------------------------ criterion 6

Outcome c6_null_behavior() {
    int identical_ok = 0;
    int disjoint_ok = 0;
    double id_min = 1.0;
    double dj_max = 0.0;
    for (int seed = 1; seed <= 20; ++seed) {
        for (const char* sc : {"identical", "disjoint"}) {
            const auto sim = simulate(sc, 2000, 2000, 2, seed);
            const Dataset data = to_dataset(sim, "affine");
            RunConfig cfg = default_config(true);
            cfg.smc.particles = 500;
            cfg.smc.seed = seed;
            const FitOutput fo = fit(data, cfg);
            PosteriorCache cache(fo.posterior, 0, 0);
            const double p0 = posterior_null_probability(cache);
            if (std::string(sc) == "identical") {
                identical_ok += p0 > 0.5;
                id_min = std::min(id_min, p0);
            } else {
                disjoint_ok += p0 < 1e-3;
                dj_max = std::max(dj_max, p0);
            }
        }
    }
    return {identical_ok >= 18 && disjoint_ok == 20,
            "identical: P(H0)>0.5 in " + std::to_string(identical_ok) + "/20 (min " + fmt("%.3f", id_min) +
                "); disjoint: P(H0)<1e-3 in " + std::to_string(disjoint_ok) + "/20 (max " + fmt("%.2e", dj_max) +
                "); M=500"};
}

// ------------------------------------------------------------ criterion 7

double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double s = 0.0;
    for (double a : pos) {
        for (double b : neg) s += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    }
    return s / (pos.size() * neg.size());
}

Outcome c7_flexible_vs_midpoint() {
    // Density: Blocks, held-out scores.
    double flex = 0.0;
    double mid = 0.0;
    for (int seed = 1; seed <= 10; ++seed) {
        const auto train = simulate("blocks", 1000, 0, 0, seed);
        const auto test = simulate("blocks", 1000, 0, 0, 1000 + seed);
        const Dataset data = Dataset::from_groups(train.groups);
        std::vector<double> pts;
        for (const auto& x : test.groups[0]) pts.insert(pts.end(), x.begin(), x.end());
        for (int grid : {32, 2}) {
            RunConfig cfg = default_config(false);
            cfg.prior.grid = grid;
            cfg.prior.eta = 0.01;
            cfg.smc.seed = seed;
            const FitOutput fo = fit(data, cfg);
            PosteriorCache cache(fo.posterior, 0, 0);
            (grid == 32 ? flex : mid) += predictive_score(cache, pts) / 10.0;
        }
    }
    const bool density_ok = flex > mid;

    // Two-sample: 50-d local location shift, 10 shifted and 10 unshifted data sets.
    std::vector<double> alt_flex, alt_mid, null_flex, null_mid;
    for (int seed = 1; seed <= 10; ++seed) {
        for (bool shifted : {true, false}) {
            Simulated sim;
            if (shifted) {
                sim = simulate("location-shift", 2000, 2000, 50, seed);
            } else {
                // Both groups drawn from the unshifted first-group law.
                const auto base = simulate("location-shift", 4000, 0, 50, 500 + seed);
                sim.dim = base.dim;
                sim.groups.resize(2);
                sim.groups[0].assign(base.groups[0].begin(), base.groups[0].begin() + 2000);
                sim.groups[1].assign(base.groups[0].begin() + 2000, base.groups[0].end());
            }
            const Dataset data = to_dataset(sim, "affine");
            for (int grid : {32, 2}) {
                RunConfig cfg = default_config(true);
                cfg.prior.grid = grid;
                cfg.smc.particles = 200;
                cfg.smc.seed = seed;
                const FitOutput fo = fit(data, cfg);
                PosteriorCache cache(fo.posterior, 0, 0);
                const double evidence = 1.0 - posterior_null_probability(cache);
                auto& v = shifted ? (grid == 32 ? alt_flex : alt_mid) : (grid == 32 ? null_flex : null_mid);
                v.push_back(evidence);
            }
        }
    }
    const double auc_flex = auc(alt_flex, null_flex);
    const double auc_mid = auc(alt_mid, null_mid);
    const bool roc_ok = auc_flex > auc_mid;
    return {density_ok && roc_ok, "Blocks mean score N_L=32 " + fmt("%.4f", flex) + " vs N_L=2 " + fmt("%.4f", mid) +
                                      "; location-shift AUC N_L=32 " + fmt("%.3f", auc_flex) + " vs N_L=2 " +
                                      fmt("%.3f", auc_mid) + " (10+10 data sets, M=200)"};
}

// ------------------------------------------------------------ criterion 8

Outcome c8_linear_scaling() {
    auto wall = [](std::size_t d, std::size_t n) {
        const auto sim = simulate("beta-mixture", n, 0, d, 1);
        const Dataset data = to_dataset(sim, "affine");
        RunConfig cfg = default_config(false);
        cfg.smc.particles = 200;
        cfg.smc.threads = 1;
        const auto t0 = std::chrono::steady_clock::now();
        const FitOutput fo = fit(data, cfg);
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    const double a = wall(6, 10000);
    const double b = wall(6, 20000);
    const double c = wall(20, 10000);
    const double e = wall(40, 10000);
    const double rn = b / a;
    const double rd = e / c;
    const bool ok = rn >= 1.5 && rn <= 2.7 && rd >= 1.5 && rd <= 2.7;
    return {ok, "n 10k->20k (d=6) ratio " + fmt("%.2f", rn) + " [" + fmt("%.1f", a) + "s, " + fmt("%.1f", b) +
                    "s]; d 20->40 (n=10k) ratio " + fmt("%.2f", rd) + " [" + fmt("%.1f", c) + "s, " + fmt("%.1f", e) +
                    "s]; M=200, one thread"};
}

// ------------------------------------------------------------ criterion 9

// Data carry no information about the partition: theta(A) is pinned to the
// volume fraction, so h = 1 for every cut and the proposal is the prior.
class VolumeModel final : public StateModel {
public:
    std::string name() const override { return "volume"; }
    int num_states() const override { return 1; }
    int required_groups() const override { return 0; }
    void transition(int, std::span<double> out) const override { out[0] = 1.0; }
    void log_marginals(const SplitCounts& c, const SplitContext& ctx, std::span<double> out) const override {
        const double m = ctx.left_fraction();
        out[0] = static_cast<double>(c.total_left()) * std::log(m) +
                 static_cast<double>(c.total_right()) * std::log1p(-m);
    }
    double expected_theta(int, int, const SplitCounts&, const SplitContext& ctx) const override {
        return ctx.left_fraction();
    }
    void sample_theta(int, const SplitCounts&, const SplitContext& ctx, StreamRng&,
                      std::span<double> out) const override {
        for (auto& v : out) v = ctx.left_fraction();
    }
    int complexity(int, int) const override { return 0; }
};

Outcome c9_spike_consistency() {
    const int grid = 8;
    const std::size_t n = 200;
    Dataset data(1, 1);
    for (std::size_t i = 0; i < n; ++i) data.add(std::vector<double>{(i + 0.5) / n}, 0);
    TreePriorConfig prior;
    prior.grid = grid;
    prior.eta = 0.02;  // eta * n = 4: clearly non-uniform location weights
    prior.spike = true;
    VolumeModel model;
    const std::size_t draws = 100000;
    std::vector<double> observed(grid - 1, 0.0);
    std::size_t refixed = 0;
    for (std::size_t k = 0; k < draws; ++k) {
        PartitionTree t(data, grid, 1, StopConfig{3, 1});
        StreamRng rng(77, k, 0);
        const auto rec = smc_step_particle(t, data, prior, model, rng);
        observed[rec.decision.loc - 1] += 1.0;
        refixed += rec.decision.refix;
    }
    // Expected law: beta_l of the non-spike prior, evaluated independently.
    std::vector<double> w;
    for (int l = 1; l < grid; ++l) w.push_back(-prior.eta * n * std::fabs(static_cast<double>(l) / grid - 0.5));
    const double z = lse(w);
    double chi2 = 0.0;
    for (int l = 0; l < grid - 1; ++l) {
        const double e = draws * std::exp(w[l] - z);
        chi2 += (observed[l] - e) * (observed[l] - e) / e;
    }
    const boost::math::chi_squared dist(grid - 2);
    const double p = boost::math::cdf(complement(dist, chi2));
    return {p > 0.01 && refixed > 0, "chi2 " + fmt("%.2f", chi2) + " on " + std::to_string(grid - 2) + " df, p " +
                                         fmt("%.3f", p) + ", " + std::to_string(draws) + " draws (" +
                                         std::to_string(refixed) + " refixed)"};
}

// ------------------------------------------------------------ criterion 10

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream o;
    o << f.rdbuf();
    return o.str();
}

Outcome c10_determinism() {
    const fs::path root = fs::temp_directory_path() / "hmpt_acceptance_c10";
    fs::remove_all(root);
    struct Job {
        std::string name;
        std::string scenario;
        bool two;
        bool spike;
    };
    const Job jobs[] = {{"density", "clusters", false, false},
                        {"density-spike", "smooth", false, true},
                        {"twosample", "location-shift", true, false}};
    bool pass = true;
    std::size_t files = 0;
    for (const auto& job : jobs) {
        const auto sim = simulate(job.scenario, 800, 800, job.two ? 6 : 0, 3);
        Ingested in;
        in.data = to_dataset(sim, "affine", &in.scaling);
        in.group_labels = job.two ? std::vector<std::string>{"0", "1"} : std::vector<std::string>{"all"};
        for (std::size_t j = 0; j < sim.dim; ++j) in.columns.push_back("x" + std::to_string(j));
        std::vector<fs::path> dirs;
        int run = 0;
        for (int threads : {1, 1, 2, 4}) {
            RunConfig cfg = default_config(job.two);
            cfg.smc.particles = 200;
            cfg.smc.seed = 42;
            cfg.smc.threads = threads;
            cfg.prior.spike = job.spike;
            const FitOutput fo = fit(in.data, cfg);
            const fs::path dir = root / (job.name + "_" + std::to_string(run++));
            write_bundle(dir.string(), fo, in, job.two ? "fit-twosample" : "fit-density", threads);
            dirs.push_back(dir);
        }
        std::set<std::string> names;
        for (const auto& e : fs::directory_iterator(dirs[0])) names.insert(e.path().filename().string());
        for (std::size_t k = 1; k < dirs.size(); ++k) {
            std::set<std::string> other;
            for (const auto& e : fs::directory_iterator(dirs[k])) other.insert(e.path().filename().string());
            if (other != names) pass = false;
        }
        for (const auto& name : names) {
            if (name == "timing.json") continue;
            const std::string ref = slurp(dirs[0] / name);
            for (std::size_t k = 1; k < dirs.size(); ++k) {
                if (slurp(dirs[k] / name) != ref) {
                    pass = false;
                    std::fprintf(stderr, "C10: %s/%s differs\n", job.name.c_str(), name.c_str());
                }
            }
            ++files;
        }
    }
    fs::remove_all(root);
    return {pass, "3 configurations x 4 runs (threads 1,1,2,4): " + std::to_string(files) +
                      " bundle files compared byte-for-byte (timing.json excluded)"};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
        double limit_seconds;  // 0 means no stated limit
    };
    const std::vector<Criterion> all = {
        {1, "exact inference vs enumeration", c1_exact_inference, 60},
        {2, "SMC tree posterior and weight identity", c2_smc_correctness, 120},
        {3, "beta-binomial vs quadrature", c3_conjugacy, 0},
        {4, "predictive mass conservation", c4_mass_conservation, 0},
        {5, "posterior concentration on the step cut", c5_concentration, 300},
        {6, "two-sample null and disjoint behavior", c6_null_behavior, 0},
        {7, "flexible vs midpoint partitioning", c7_flexible_vs_midpoint, 0},
        {8, "linear scaling in n and d", c8_linear_scaling, 1200},
        {9, "spike-and-slab location law", c9_spike_consistency, 0},
        {10, "determinism across thread counts", c10_determinism, 0},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_seconds > 0 && secs > c.limit_seconds) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", c.limit_seconds) + "s limit";
        }
        std::printf("C%-2d %s  %s: %s  [%.1fs]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
