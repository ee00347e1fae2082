#pragma once

#include "hmpt/message_passing.hpp"
#include "hmpt/models.hpp"
#include "hmpt/tree.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hmpt {

/// e[node * I + i] = E[Q(A) 1{V(A)=i} | x, T]; mass[node] = E[Q(A) | x, T].
struct PredictiveMasses {
    int states = 1;
    std::vector<double> e;
    std::vector<double> mass;
};

PredictiveMasses predictive_masses(const PartitionTree& tree, const MessageSet& msgs, const StateModel& model,
                                   int group = 0);

/// A weighted population of trees with the model they were fitted under.
/// Trees may repeat (shared pointers after resampling).
struct Posterior {
    std::vector<std::shared_ptr<const PartitionTree>> trees;
    std::vector<double> weights;  ///< normalized, linear
    const StateModel* model = nullptr;
};

/// Per-distinct-tree messages and masses, computed once and reused for many queries.
class PosteriorCache {
public:
    PosteriorCache(const Posterior& post, int group = 0, int threads = 1);

    const Posterior& posterior() const { return post_; }
    std::size_t distinct() const { return unique_.size(); }
    /// Index into the distinct-tree tables for particle m.
    std::size_t slot(std::size_t m) const { return slot_[m]; }
    const PartitionTree& tree(std::size_t s) const { return *unique_[s]; }
    const MessageSet& messages(std::size_t s) const { return msgs_[s]; }
    const PredictiveMasses& masses(std::size_t s) const { return masses_[s]; }
    /// Summed weight of every particle carrying distinct tree s.
    double weight(std::size_t s) const { return weight_[s]; }

private:
    const Posterior& post_;
    std::vector<const PartitionTree*> unique_;
    std::vector<std::size_t> slot_;
    std::vector<double> weight_;
    std::vector<MessageSet> msgs_;
    std::vector<PredictiveMasses> masses_;
};

/// Posterior predictive density at each row of `points` (row-major, d columns).
std::vector<double> predictive_density(const PosteriorCache& cache, std::span<const double> points);

/// Mean log predictive density over the test points.
double predictive_score(const PosteriorCache& cache, std::span<const double> points);

struct EffectSizeOptions {
    std::size_t draws = 1000;
    std::uint64_t seed = 1;
    /// When true, report E[eff | V(A) = decoupled] instead of multiplying by the PMAP.
    bool conditional = false;
};

/// Posterior mean of |logit theta_1 - logit theta_2| at an internal node of a two-sample fit.
double effect_size(const PartitionTree& tree, int node, const MessageSet& msgs, const StateModel& model,
                   const EffectSizeOptions& opts);

struct NodeReportRow {
    int node = 0;
    int depth = 0;
    int split_dim = 0;
    double cut = 0.0;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<std::uint32_t> counts;
    double pmap = 0.0;
    double effect_size = 0.0;
};

struct TwoSampleReport {
    double p_h0 = 0.0;
    std::size_t map_index = 0;
    std::vector<NodeReportRow> rows;  ///< MAP-tree internal nodes, largest effect first
};

struct ReportOptions {
    EffectSizeOptions effect;
    /// Only internal nodes holding at least this many points are listed.
    std::size_t min_node_count = 0;
};

TwoSampleReport two_sample_report(const PosteriorCache& cache, std::size_t map_index, const ReportOptions& opts);

/// Weighted global null probability over the population.
double posterior_null_probability(const PosteriorCache& cache);

std::string report_rows_csv(const TwoSampleReport& report);
nlohmann::ordered_json report_summary_json(const TwoSampleReport& report, std::size_t top_k);

} // namespace hmpt
