#include "hmpt/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hmpt {

namespace {

constexpr std::size_t kRisingCap = 4096;

double rising_direct(double a, std::uint32_t n) {
    return n == 0 ? 0.0 : log_gamma(a + n) - log_gamma(a);
}

}  // namespace

double beta_binomial_log_marginal(const BetaSplitPrior& prior, std::uint64_t n_left, std::uint64_t n_right) {
    const double a = prior.alpha_left;
    const double b = prior.alpha_right;
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta prior parameters must be positive");
    return log_beta(a + static_cast<double>(n_left), b + static_cast<double>(n_right)) - log_beta(a, b);
}

std::uint64_t SplitCounts::total_left() const {
    std::uint64_t s = 0;
    for (auto c : left) s += c;
    return s;
}

std::uint64_t SplitCounts::total_right() const {
    std::uint64_t s = 0;
    for (auto c : right) s += c;
    return s;
}

std::vector<double> StateModel::transition(int depth) const {
    const auto n = static_cast<std::size_t>(num_states());
    std::vector<double> out(n * n);
    transition(depth, out);
    return out;
}

std::vector<double> StateModel::initial() const {
    const auto xi = transition(0);
    return {xi.begin(), xi.begin() + num_states()};
}

double StateModel::log_marginal(int state, const SplitCounts& counts, const SplitContext& ctx) const {
    std::vector<double> all(num_states());
    log_marginals(counts, ctx, all);
    return all.at(state);
}

// ---------------------------------------------------------------- plain PT

PlainPtModel::PlainPtModel(PlainPtOptions opts) : opts_(opts) {
    if (!(opts_.alpha_scale > 0.0)) throw std::invalid_argument("pt.alpha_scale must be positive");
}

double PlainPtModel::alpha(int depth) const {
    if (!opts_.depth_scaled) return opts_.alpha_scale;
    const double k = depth + 1.0;
    return opts_.alpha_scale * k * k;
}

void PlainPtModel::transition(int, std::span<double> out) const { out[0] = 1.0; }

void PlainPtModel::prepare(const ModelPrepare& info) {
    single_.clear();
    double_.clear();
    const std::size_t cap = std::min(info.max_count, kRisingCap);
    const int depths = opts_.depth_scaled ? info.max_depth + 1 : 1;
    for (int k = 0; k < depths; ++k) {
        single_.emplace_back(alpha(k), cap);
        double_.emplace_back(2.0 * alpha(k), cap);
    }
}

void PlainPtModel::log_marginals(const SplitCounts& counts, const SplitContext& ctx, std::span<double> out) const {
    const int slot = opts_.depth_scaled ? ctx.depth : 0;
    double total = 0.0;
    if (slot >= 0 && static_cast<std::size_t>(slot) < single_.size()) {
        const auto& one = single_[slot];
        const auto& two = double_[slot];
        for (std::size_t g = 0; g < counts.left.size(); ++g) {
            total += one(counts.left[g]) + one(counts.right[g]) - two(counts.left[g] + counts.right[g]);
        }
    } else {
        const double a = alpha(ctx.depth);
        for (std::size_t g = 0; g < counts.left.size(); ++g) {
            total += beta_binomial_log_marginal({a, a}, counts.left[g], counts.right[g]);
        }
    }
    out[0] = total;
}

double PlainPtModel::expected_theta(int, int group, const SplitCounts& counts, const SplitContext& ctx) const {
    const double a = alpha(ctx.depth);
    const double nl = counts.left[group];
    const double nr = counts.right[group];
    return (a + nl) / (2.0 * a + nl + nr);
}

void PlainPtModel::sample_theta(int, const SplitCounts& counts, const SplitContext& ctx, StreamRng& rng,
                                std::span<double> out) const {
    const double a = alpha(ctx.depth);
    for (std::size_t g = 0; g < counts.left.size(); ++g) {
        out[g] = sample_beta(a + counts.left[g], a + counts.right[g], rng);
    }
}

int PlainPtModel::complexity(int, int groups) const { return groups; }

// ---------------------------------------------------------------- APT

AptModel::AptModel(AptOptions opts) : opts_(opts) {
    if (opts_.states < 2) throw std::invalid_argument("apt.states must be at least 2");
    if (opts_.grid_points < 1) throw std::invalid_argument("apt.grid_points must be positive");
    if (!(opts_.log10_nu_upper > opts_.log10_nu_lower)) throw std::invalid_argument("apt.log10nu must be increasing");
    const int top = opts_.states - 1;
    // a(i) = L + (i-1)(U-L)/(I-1) for the paper's 1-based i; state s covers (a(s+1), a(s+2)].
    const double width = (opts_.log10_nu_upper - opts_.log10_nu_lower) / top;
    nu_.resize(top);
    for (int s = 0; s < top; ++s) {
        const double lo = opts_.log10_nu_lower + s * width;
        for (int k = 1; k <= opts_.grid_points; ++k) {
            nu_[s].push_back(std::pow(10.0, lo + width * k / opts_.grid_points));
        }
    }
    const int n = opts_.states;
    xi_.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = 0.0;
        for (int j = i; j < n; ++j) z += std::exp(opts_.beta * (i - j));
        for (int j = i; j < n; ++j) xi_[i * n + j] = std::exp(opts_.beta * (i - j)) / z;
    }
}

void AptModel::transition(int, std::span<double> out) const { std::copy(xi_.begin(), xi_.end(), out.begin()); }

void AptModel::prepare(const ModelPrepare& info) {
    const int top = opts_.states - 1;
    const int pts = opts_.grid_points;
    const std::size_t cap = std::min(info.max_count, kRisingCap);
    cached_grid_ = info.grid;
    alpha_cache_.clear();
    nu_cache_.clear();
    for (int loc = 1; loc < info.grid; ++loc) {
        const double m = static_cast<double>(loc) / info.grid;
        for (int s = 0; s < top; ++s) {
            for (int k = 0; k < pts; ++k) alpha_cache_.emplace_back(m * nu_[s][k], cap);
        }
    }
    for (int s = 0; s < top; ++s) {
        for (int k = 0; k < pts; ++k) nu_cache_.emplace_back(nu_[s][k], cap);
    }
    small_cap_ = 0;
    small_table_.clear();
    const std::uint32_t small = static_cast<std::uint32_t>(std::min<std::size_t>(info.max_count, 128));
    const std::size_t tri = (small + 1) * (small + 2) / 2;
    std::vector<double> table(static_cast<std::size_t>(info.grid - 1) * tri * opts_.states);
    for (int loc = 1; loc < info.grid; ++loc) {
        const SplitContext ctx{0, loc, info.grid};
        for (std::uint32_t n = 0; n <= small; ++n) {
            for (std::uint32_t nl = 0; nl <= n; ++nl) {
                double* out = table.data() + ((loc - 1) * tri + n * (n + 1) / 2 + nl) * opts_.states;
                for (int s = 0; s < opts_.states; ++s) out[s] = state_log_marginal(s, nl, n - nl, ctx);
            }
        }
    }
    small_table_ = std::move(table);
    small_cap_ = small;
}

double AptModel::rising(int loc, int grid, int state, int k, std::uint32_t n) const {
    if (grid == cached_grid_ && !alpha_cache_.empty()) {
        const int top = opts_.states - 1;
        const std::size_t idx = (static_cast<std::size_t>(loc - 1) * top + state) * opts_.grid_points + k;
        return alpha_cache_[idx](n);
    }
    return rising_direct(static_cast<double>(loc) / grid * nu_[state][k], n);
}

double AptModel::rising_total(int state, int k, std::uint32_t n) const {
    if (!nu_cache_.empty()) return nu_cache_[static_cast<std::size_t>(state) * opts_.grid_points + k](n);
    return rising_direct(nu_[state][k], n);
}

void AptModel::nu_log_posterior(int state, std::uint32_t n_left, std::uint32_t n_right, const SplitContext& ctx,
                                std::span<double> out) const {
    const int rloc = ctx.grid - ctx.loc;
    for (int k = 0; k < opts_.grid_points; ++k) {
        out[k] = rising(ctx.loc, ctx.grid, state, k, n_left) + rising(rloc, ctx.grid, state, k, n_right) -
                 rising_total(state, k, n_left + n_right);
    }
}

double AptModel::state_log_marginal(int state, std::uint32_t n_left, std::uint32_t n_right,
                                    const SplitContext& ctx) const {
    const int top = opts_.states - 1;
    if (state == top) {
        const double m = ctx.left_fraction();
        return (n_left ? n_left * std::log(m) : 0.0) + (n_right ? n_right * std::log1p(-m) : 0.0);
    }
    double buf[64];
    std::vector<double> heap;
    std::span<double> terms;
    if (opts_.grid_points <= 64) {
        terms = std::span<double>(buf, opts_.grid_points);
    } else {
        heap.resize(opts_.grid_points);
        terms = heap;
    }
    nu_log_posterior(state, n_left, n_right, ctx, terms);
    return log_sum_exp(terms) - std::log(static_cast<double>(opts_.grid_points));
}

void AptModel::log_marginals(const SplitCounts& counts, const SplitContext& ctx, std::span<double> out) const {
    if (counts.left.size() != 1) throw std::invalid_argument("apt model requires exactly one group");
    const auto nl = counts.left[0];
    const auto nr = counts.right[0];
    const std::uint32_t n = nl + nr;
    if (!small_table_.empty() && n <= small_cap_ && ctx.grid == cached_grid_) {
        const std::size_t tri = (small_cap_ + 1) * (small_cap_ + 2) / 2;
        const double* row = small_table_.data() + ((ctx.loc - 1) * tri + n * (n + 1) / 2 + nl) * opts_.states;
        std::copy(row, row + opts_.states, out.begin());
        return;
    }
    for (int s = 0; s < opts_.states; ++s) out[s] = state_log_marginal(s, nl, nr, ctx);
}

double AptModel::expected_theta(int state, int, const SplitCounts& counts, const SplitContext& ctx) const {
    const double m = ctx.left_fraction();
    if (state == opts_.states - 1) return m;
    const auto nl = counts.left[0];
    const auto nr = counts.right[0];
    std::vector<double> lp(opts_.grid_points);
    nu_log_posterior(state, nl, nr, ctx, lp);
    const double z = log_sum_exp(lp);
    double mean = 0.0;
    for (int k = 0; k < opts_.grid_points; ++k) {
        const double nu = nu_[state][k];
        mean += std::exp(lp[k] - z) * (m * nu + nl) / (nu + nl + nr);
    }
    return mean;
}

void AptModel::sample_theta(int state, const SplitCounts& counts, const SplitContext& ctx, StreamRng& rng,
                            std::span<double> out) const {
    const double m = ctx.left_fraction();
    if (state == opts_.states - 1) {
        out[0] = m;
        return;
    }
    const auto nl = counts.left[0];
    const auto nr = counts.right[0];
    std::vector<double> lp(opts_.grid_points);
    nu_log_posterior(state, nl, nr, ctx, lp);
    const double nu = nu_[state][sample_log_categorical(lp, rng)];
    out[0] = sample_beta(m * nu + nl, (1.0 - m) * nu + nr, rng);
}

int AptModel::complexity(int state, int) const { return state == opts_.states - 1 ? 0 : 1; }

// ---------------------------------------------------------------- MRS

MrsModel::MrsModel(MrsOptions opts) : opts_(opts) {
    if (!(opts_.gamma > 0.0 && opts_.gamma < 1.0)) throw std::invalid_argument("mrs.gamma must lie in (0,1)");
    if (!(opts_.rho >= 0.0 && opts_.rho <= 1.0)) throw std::invalid_argument("mrs.rho must lie in [0,1]");
    if (!(opts_.nu0 > 0.0)) throw std::invalid_argument("mrs.nu0 must be positive");
}

void MrsModel::transition(int depth, std::span<double> out) const {
    const double g = opts_.gamma;
    const double r = opts_.rho;
    const double gk = g * std::ldexp(1.0, -depth);
    const double xi[9] = {(1 - r) * g, (1 - r) * (1 - g), r, (1 - r) * gk, (1 - r) * (1 - gk), r, 0.0, 0.0, 1.0};
    std::copy(std::begin(xi), std::end(xi), out.begin());
}

BetaSplitPrior MrsModel::prior(const SplitContext& ctx) const {
    const double m = ctx.left_fraction();
    return {opts_.nu0 * m, opts_.nu0 * (1.0 - m)};
}

void MrsModel::prepare(const ModelPrepare& info) {
    const std::size_t cap = std::min(info.max_count, kRisingCap);
    cached_grid_ = info.grid;
    alpha_cache_.clear();
    for (int loc = 1; loc < info.grid; ++loc) alpha_cache_.emplace_back(opts_.nu0 * loc / info.grid, cap);
    total_cache_ = LogRisingFactorial(opts_.nu0, cap);
}

double MrsModel::group_log_marginal(std::uint32_t n_left, std::uint32_t n_right, const SplitContext& ctx) const {
    if (ctx.grid == cached_grid_ && !alpha_cache_.empty()) {
        return alpha_cache_[ctx.loc - 1](n_left) + alpha_cache_[ctx.grid - ctx.loc - 1](n_right) -
               total_cache_(n_left + n_right);
    }
    return beta_binomial_log_marginal(prior(ctx), n_left, n_right);
}

void MrsModel::log_marginals(const SplitCounts& counts, const SplitContext& ctx, std::span<double> out) const {
    if (counts.left.size() != 2) throw std::invalid_argument("mrs model requires exactly two groups");
    const double decoupled = group_log_marginal(counts.left[0], counts.right[0], ctx) +
                             group_log_marginal(counts.left[1], counts.right[1], ctx);
    const double coupled = group_log_marginal(counts.left[0] + counts.left[1], counts.right[0] + counts.right[1], ctx);
    out[0] = decoupled;
    out[1] = coupled;
    out[2] = coupled;
}

double MrsModel::expected_theta(int state, int group, const SplitCounts& counts, const SplitContext& ctx) const {
    const auto p = prior(ctx);
    double nl = 0.0;
    double nr = 0.0;
    if (state == 0) {
        nl = counts.left[group];
        nr = counts.right[group];
    } else {
        nl = static_cast<double>(counts.total_left());
        nr = static_cast<double>(counts.total_right());
    }
    return (p.alpha_left + nl) / (p.alpha_left + p.alpha_right + nl + nr);
}

void MrsModel::sample_theta(int state, const SplitCounts& counts, const SplitContext& ctx, StreamRng& rng,
                            std::span<double> out) const {
    const auto p = prior(ctx);
    if (state == 0) {
        for (int g = 0; g < 2; ++g) {
            out[g] = sample_beta(p.alpha_left + counts.left[g], p.alpha_right + counts.right[g], rng);
        }
        return;
    }
    const double shared = sample_beta(p.alpha_left + static_cast<double>(counts.total_left()),
                                      p.alpha_right + static_cast<double>(counts.total_right()), rng);
    out[0] = shared;
    out[1] = shared;
}

int MrsModel::complexity(int state, int) const { return state == 0 ? 2 : 1; }

// ---------------------------------------------------------------- factory

std::unique_ptr<StateModel> make_model(const ModelConfig& cfg) {
    if (cfg.kind == "pt") return std::make_unique<PlainPtModel>(cfg.pt);
    if (cfg.kind == "apt") return std::make_unique<AptModel>(cfg.apt);
    if (cfg.kind == "mrs") return std::make_unique<MrsModel>(cfg.mrs);
    throw std::invalid_argument("unknown model '" + cfg.kind + "' (expected pt, apt or mrs)");
}

} // namespace hmpt
