#pragma once

#include "hmpt/numeric.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hmpt {

/// Beta(alpha_left, alpha_right) prior on a conditional split probability.
struct BetaSplitPrior {
    double alpha_left = 1.0;
    double alpha_right = 1.0;
};

/// log[B(a_l + n_l, a_r + n_r) / B(a_l, a_r)] through log-gamma.
double beta_binomial_log_marginal(const BetaSplitPrior& prior, std::uint64_t n_left, std::uint64_t n_right);

/// Per-group counts on the two sides of a (proposed or realized) split.
struct SplitCounts {
    std::span<const std::uint32_t> left;
    std::span<const std::uint32_t> right;

    std::uint64_t total_left() const;
    std::uint64_t total_right() const;
};

/// Where the split sits: depth of the node being divided and the cut loc/grid.
struct SplitContext {
    int depth = 0;
    int loc = 1;
    int grid = 2;

    double left_fraction() const { return static_cast<double>(loc) / grid; }
};

/// Cache sizing handed to a model before a run.
struct ModelPrepare {
    std::size_t max_count = 0;
    int grid = 2;
    int max_depth = 0;
};

/// Latent-state specification of a hidden-Markov Polya tree. States are
/// 0-based. Implementations are immutable after prepare() and may be shared
/// across threads.
class StateModel {
public:
    virtual ~StateModel() = default;

    virtual std::string name() const = 0;
    virtual int num_states() const = 0;
    /// Number of groups the model requires, or 0 for any.
    virtual int required_groups() const = 0;

    /// Row-major I x I transition matrix xi(A) for a node at `depth`.
    virtual void transition(int depth, std::span<double> out) const = 0;
    std::vector<double> transition(int depth) const;
    /// State distribution at the root (first row of xi(Omega)).
    virtual std::vector<double> initial() const;

    /// log M_i(A | J) for every state i.
    virtual void log_marginals(const SplitCounts& counts, const SplitContext& ctx, std::span<double> out) const = 0;
    double log_marginal(int state, const SplitCounts& counts, const SplitContext& ctx) const;

    /// Posterior mean of theta_g(A) given V(A) = state.
    virtual double expected_theta(int state, int group, const SplitCounts& counts, const SplitContext& ctx) const = 0;
    /// One joint posterior draw of (theta_1..theta_G) given V(A) = state.
    virtual void sample_theta(int state, const SplitCounts& counts, const SplitContext& ctx, StreamRng& rng,
                              std::span<double> out) const = 0;

    /// Number of free split parameters under `state`.
    virtual int complexity(int state, int groups) const = 0;
    /// True when groups carry independent split probabilities under `state`.
    virtual bool decoupled(int /*state*/) const { return false; }

    virtual void prepare(const ModelPrepare& /*info*/) {}
};

struct PlainPtOptions {
    /// alpha = scale * (depth + 1)^2 when depth_scaled, else alpha = scale.
    double alpha_scale = 0.1;
    bool depth_scaled = true;
};

/// Single-state Polya tree with symmetric Beta(alpha, alpha) splits; any number of groups.
class PlainPtModel final : public StateModel {
public:
    explicit PlainPtModel(PlainPtOptions opts = {});

    std::string name() const override { return "pt"; }
    int num_states() const override { return 1; }
    int required_groups() const override { return 0; }
    void transition(int depth, std::span<double> out) const override;
    void log_marginals(const SplitCounts& counts, const SplitContext& ctx, std::span<double> out) const override;
    double expected_theta(int state, int group, const SplitCounts& counts, const SplitContext& ctx) const override;
    void sample_theta(int state, const SplitCounts& counts, const SplitContext& ctx, StreamRng& rng,
                      std::span<double> out) const override;
    int complexity(int state, int groups) const override;
    void prepare(const ModelPrepare& info) override;

    double alpha(int depth) const;
    const PlainPtOptions& options() const { return opts_; }

private:
    PlainPtOptions opts_;
    std::vector<LogRisingFactorial> single_;  // per depth, alpha
    std::vector<LogRisingFactorial> double_;  // per depth, 2 alpha
};

struct AptOptions {
    int states = 5;
    double beta = 0.1;
    double log10_nu_lower = -1.0;
    double log10_nu_upper = 4.0;
    int grid_points = 5;
};

/// Adaptive Polya tree: states 0..I-2 put Beta(m nu, (1-m) nu) on theta with
/// log10 nu uniform on a state-specific interval (approximated on a grid);
/// the top state fixes theta = m, the volume fraction of the left child.
class AptModel final : public StateModel {
public:
    explicit AptModel(AptOptions opts = {});

    std::string name() const override { return "apt"; }
    int num_states() const override { return opts_.states; }
    int required_groups() const override { return 1; }
    void transition(int depth, std::span<double> out) const override;
    void log_marginals(const SplitCounts& counts, const SplitContext& ctx, std::span<double> out) const override;
    double expected_theta(int state, int group, const SplitCounts& counts, const SplitContext& ctx) const override;
    void sample_theta(int state, const SplitCounts& counts, const SplitContext& ctx, StreamRng& rng,
                      std::span<double> out) const override;
    int complexity(int state, int groups) const override;
    void prepare(const ModelPrepare& info) override;

    /// Precision grid of a non-top state (right endpoints of equal sub-intervals in log10).
    const std::vector<double>& nu_grid(int state) const { return nu_[state]; }
    const AptOptions& options() const { return opts_; }

private:
    double state_log_marginal(int state, std::uint32_t n_left, std::uint32_t n_right, const SplitContext& ctx) const;
    void nu_log_posterior(int state, std::uint32_t n_left, std::uint32_t n_right, const SplitContext& ctx,
                          std::span<double> out) const;
    double rising(int loc, int grid, int state, int k, std::uint32_t n) const;
    double rising_total(int state, int k, std::uint32_t n) const;

    AptOptions opts_;
    std::vector<std::vector<double>> nu_;
    std::vector<double> xi_;
    // Prepared caches: per (loc, state, grid point) alpha = (loc/grid) nu, and per (state, point) nu.
    int cached_grid_ = 0;
    std::vector<LogRisingFactorial> alpha_cache_;
    std::vector<LogRisingFactorial> nu_cache_;
    // All state marginals for n_left + n_right <= small_cap_, per location.
    std::uint32_t small_cap_ = 0;
    std::vector<double> small_table_;
};

struct MrsOptions {
    double gamma = 0.3;
    double rho = 0.3;
    /// Beta(nu0 * m, nu0 * (1 - m)) with m the left volume fraction.
    double nu0 = 1.0;
};

/// Two-group multi-resolution scanning model: state 0 decouples the groups'
/// split probabilities, state 1 ties them, state 2 ties them and is absorbing.
class MrsModel final : public StateModel {
public:
    explicit MrsModel(MrsOptions opts = {});

    std::string name() const override { return "mrs"; }
    int num_states() const override { return 3; }
    int required_groups() const override { return 2; }
    void transition(int depth, std::span<double> out) const override;
    void log_marginals(const SplitCounts& counts, const SplitContext& ctx, std::span<double> out) const override;
    double expected_theta(int state, int group, const SplitCounts& counts, const SplitContext& ctx) const override;
    void sample_theta(int state, const SplitCounts& counts, const SplitContext& ctx, StreamRng& rng,
                      std::span<double> out) const override;
    int complexity(int state, int groups) const override;
    bool decoupled(int state) const override { return state == 0; }
    void prepare(const ModelPrepare& info) override;

    BetaSplitPrior prior(const SplitContext& ctx) const;
    const MrsOptions& options() const { return opts_; }

private:
    double group_log_marginal(std::uint32_t n_left, std::uint32_t n_right, const SplitContext& ctx) const;

    MrsOptions opts_;
    int cached_grid_ = 0;
    std::vector<LogRisingFactorial> alpha_cache_;  // per loc: nu0 * loc / grid
    LogRisingFactorial total_cache_;
};

/// Model selection plus the parameters of every model family.
struct ModelConfig {
    std::string kind = "apt";  ///< "pt" | "apt" | "mrs"
    PlainPtOptions pt;
    AptOptions apt;
    MrsOptions mrs;
};

std::unique_ptr<StateModel> make_model(const ModelConfig& cfg);

} // namespace hmpt
