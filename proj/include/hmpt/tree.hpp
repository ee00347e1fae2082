#pragma once

#include "hmpt/geometry.hpp"
#include "hmpt/priors.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace hmpt {

struct StopConfig {
    int max_depth = 15;
    std::size_t min_count = 5;
};

/// A node stops dividing at the maximum depth or when it holds fewer than min_count points.
bool should_terminate(int depth, std::size_t count, const StopConfig& cfg);

enum class NodeStatus : std::uint8_t { active, terminated, internal };

const char* to_string(NodeStatus s);

/// One finite partition tree. Nodes live in an append-only struct-of-arrays
/// arena; the two children of a node always get consecutive ids (left first).
/// Rectangles and point-index lists are held only for active leaves, which
/// sit in a FIFO queue in creation order.
class PartitionTree {
public:
    struct ActiveLeaf {
        int node = 0;
        Rect rect;
        std::vector<std::uint32_t> indices;
    };

    /// Minimal per-node description used to rebuild a tree without the data.
    struct Record {
        int parent = -1;
        std::optional<Decision> decision;
        std::vector<std::uint32_t> counts;
        NodeStatus status = NodeStatus::terminated;
    };

    PartitionTree() = default;
    /// Root-only tree over all points of `data`.
    PartitionTree(const Dataset& data, int grid, int num_states, StopConfig stop);

    /// Replays decisions in id order; counts are taken from the records.
    static PartitionTree from_records(std::size_t dim, std::size_t groups, int grid, int num_states,
                                      StopConfig stop, const std::vector<Record>& records);

    std::size_t size() const { return parent_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t groups() const { return groups_; }
    int grid() const { return grid_; }
    int num_states() const { return states_; }
    const StopConfig& stop() const { return stop_; }

    int parent(int id) const { return parent_[id]; }
    int left(int id) const { return left_[id]; }
    int right(int id) const { return left_[id] < 0 ? -1 : left_[id] + 1; }
    int depth(int id) const { return depth_[id]; }
    NodeStatus status(int id) const { return status_[id]; }
    bool is_leaf(int id) const { return status_[id] != NodeStatus::internal; }
    Decision decision(int id) const { return {dim_of_[id], loc_[id], refix_[id] != 0}; }
    /// Absolute cut coordinate of an internal node.
    double cut(int id) const { return cut_[id]; }
    double log_volume(int id) const { return log_volume_[id]; }
    std::span<const std::uint32_t> counts(int id) const { return {counts_.data() + id * groups_, groups_}; }
    std::uint64_t total(int id) const;

    /// Stored log phi_i(A) of a divided node (normalized), empty for other nodes.
    std::span<const double> log_phi(int id) const;
    void set_log_phi(int id, std::span<const double> log_phi);

    /// Front of the division queue.
    std::optional<int> next_node_to_divide() const;
    std::size_t active_count() const { return queue_.size(); }
    const ActiveLeaf& active(int id) const;
    const std::deque<ActiveLeaf>& queue() const { return queue_; }

    /// Divides an active leaf; children are created left then right and
    /// enqueued unless they stop immediately.
    std::pair<int, int> apply_decision(int id, const Decision& dec, const Dataset& data);
    /// Stops an active leaf without dividing it.
    void terminate(int id);

    std::vector<int> leaves() const;
    std::vector<int> internal_nodes() const;
    /// Leaf containing x (left on ties).
    int find_leaf(std::span<const double> x) const;
    /// Rectangle of any node, rebuilt by walking down from the root.
    Rect rect_of(int id) const;

    std::vector<Record> records() const;

private:
    int add_node(int parent, int depth, double log_volume, std::span<const std::uint32_t> counts);
    void enqueue_or_stop(int id, Rect rect, std::vector<std::uint32_t> indices);

    std::size_t dim_ = 0;
    std::size_t groups_ = 1;
    int grid_ = 2;
    int states_ = 1;
    StopConfig stop_;

    std::vector<int> parent_;
    std::vector<int> left_;
    std::vector<std::int16_t> depth_;
    std::vector<std::int16_t> dim_of_;
    std::vector<std::int16_t> loc_;
    std::vector<std::uint8_t> refix_;
    std::vector<NodeStatus> status_;
    std::vector<double> cut_;
    std::vector<double> log_volume_;
    std::vector<std::uint32_t> counts_;
    std::vector<double> log_phi_;  // states_ entries per node; NaN until set

    std::deque<ActiveLeaf> queue_;
};

/// log P(T): dimension and location prior terms over internal nodes, with
/// refix transitions when the spike prior is enabled. Throws on a decision
/// outside the prior support.
double log_tree_prior(const PartitionTree& tree, const TreePriorConfig& prior);

/// log prior of one decision at a node holding n_node points.
double log_decision_prior(const Decision& dec, std::size_t n_node, bool parent_refixed, std::size_t dim,
                          const TreePriorConfig& prior);

nlohmann::ordered_json tree_to_json(const PartitionTree& tree);
PartitionTree tree_from_json(const nlohmann::json& j, int num_states = 1, StopConfig stop = {});
std::string tree_to_dot(const PartitionTree& tree);

} // namespace hmpt
