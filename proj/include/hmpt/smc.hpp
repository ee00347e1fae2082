#pragma once

#include "hmpt/geometry.hpp"
#include "hmpt/models.hpp"
#include "hmpt/numeric.hpp"
#include "hmpt/priors.hpp"
#include "hmpt/tree.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace hmpt {

struct SmcConfig {
    std::size_t particles = 1000;
    StopConfig stop;
    double kappa = 0.5;
    double ess_fraction = 0.1;
    std::uint64_t seed = 1;
    int threads = 0;
    /// Reweight each final tree by P(x|T) / prod h so the population targets
    /// the exact posterior when I > 1.
    bool exact_final_weights = true;
};

void validate(const SmcConfig& cfg);

struct Particle {
    std::shared_ptr<PartitionTree> tree;
    double log_weight = 0.0;  ///< normalized log W
    // Running sums over this particle's ancestry of decisions.
    double sum_log_increment = 0.0;
    double sum_log_prior = 0.0;
    double sum_log_proposal = 0.0;
    double sum_log_h = 0.0;
    double final_correction = 0.0;
};

/// Left counts of every candidate cut at one node, laid out as
/// [(dim * (grid - 1) + loc - 1) * groups + g], plus the per-group totals.
struct CandidateCounts {
    std::size_t dim = 0;
    int grid = 2;
    std::size_t groups = 1;
    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> total;
    /// False where the cut would not fall strictly inside the rectangle in floating point.
    std::vector<std::uint8_t> valid;

    std::span<const std::uint32_t> left_at(std::size_t j, int loc) const {
        return {left.data() + (j * (grid - 1) + loc - 1) * groups, groups};
    }
};

CandidateCounts count_candidates(const Rect& rect, std::span<const std::uint32_t> indices, const Dataset& data,
                                 int grid);

/// log of sum_j phi_j(A^p) xi_{j,i}(A) for each state i; the initial row at the root.
std::vector<double> log_state_prior(const StateModel& model, int depth, std::span<const double> parent_log_phi);

/// log h(J | A); log M_i(A | J) is written to `log_m`.
double compute_log_h(const StateModel& model, std::span<const double> state_prior, const SplitCounts& counts,
                     const SplitContext& ctx, std::span<double> log_m);

/// log phi(A) after the decision, normalized.
std::vector<double> update_phi(std::span<const double> state_prior, std::span<const double> log_m);

struct ProposalTable {
    std::size_t dim = 0;
    int grid = 2;
    std::vector<double> log_h;      ///< d x (grid-1); -inf for unusable cuts
    std::vector<double> log_joint;  ///< log lambda_j + log beta_l + log h
    std::vector<double> log_dim;    ///< log lambda-tilde_j
    std::vector<double> log_loc;    ///< log beta-tilde_{l|j}, each row normalized
    double log_weight = 0.0;        ///< log w_t = logsumexp(log_joint)
    std::vector<double> state_prior;

    std::size_t index(std::size_t j, int loc) const { return j * (grid - 1) + loc - 1; }
};

ProposalTable build_proposal(const PartitionTree& tree, int node, const Dataset& data, const TreePriorConfig& prior,
                             const StateModel& model);

/// What one particle did at one step.
struct StepRecord {
    bool divided = false;
    Decision decision;
    double log_increment = 0.0;
    double log_prior = 0.0;
    double log_proposal = 0.0;
    double log_h = 0.0;
};

/// Divides the particle's next node (or stops it when no usable cut exists).
StepRecord smc_step_particle(PartitionTree& tree, const Dataset& data, const TreePriorConfig& prior,
                             const StateModel& model, StreamRng& rng);

double ess(std::span<const double> weights);

/// Systematic resampling on a proportional to W^kappa; returns ancestor indices.
std::vector<std::size_t> systematic_resample(std::span<const double> log_weights, double kappa, double u);

struct StepDiagnostics {
    std::size_t step = 0;
    std::size_t active_particles = 0;
    double ess = 0.0;
    bool resampled = false;
    double min_log_weight = 0.0;
    double max_log_weight = 0.0;
};

struct SmcResult {
    std::vector<Particle> particles;
    std::vector<StepDiagnostics> diagnostics;
    std::size_t steps = 0;
    std::size_t resamples = 0;
    std::size_t peak_nodes = 0;
};

using StepCallback = std::function<void(const StepDiagnostics&)>;

SmcResult run_smc(const Dataset& data, StateModel& model, const TreePriorConfig& prior, const SmcConfig& cfg,
                  const StepCallback& on_step = {});

/// Normalized linear weights of a population.
std::vector<double> particle_weights(const std::vector<Particle>& particles);

} // namespace hmpt
