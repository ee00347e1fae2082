#include "hmpt/tree.hpp"

#include "hmpt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hmpt {

bool should_terminate(int depth, std::size_t count, const StopConfig& cfg) {
    return depth >= cfg.max_depth || count < cfg.min_count;
}

const char* to_string(NodeStatus s) {
    switch (s) {
        case NodeStatus::active: return "active";
        case NodeStatus::terminated: return "terminated";
        case NodeStatus::internal: return "internal";
    }
    return "?";
}

PartitionTree::PartitionTree(const Dataset& data, int grid, int num_states, StopConfig stop)
    : dim_(data.dim()), groups_(data.groups()), grid_(grid), states_(num_states), stop_(stop) {
    if (grid < 2) throw std::invalid_argument("grid must be at least 2");
    if (num_states < 1) throw std::invalid_argument("num_states must be positive");
    std::vector<std::uint32_t> counts(groups_, 0);
    std::vector<std::uint32_t> indices(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        indices[i] = static_cast<std::uint32_t>(i);
        ++counts[data.group(i)];
    }
    const int root = add_node(-1, 0, 0.0, counts);
    enqueue_or_stop(root, Rect::unit(dim_), std::move(indices));
}

int PartitionTree::add_node(int parent, int depth, double log_volume, std::span<const std::uint32_t> counts) {
    const int id = static_cast<int>(parent_.size());
    parent_.push_back(parent);
    left_.push_back(-1);
    depth_.push_back(static_cast<std::int16_t>(depth));
    dim_of_.push_back(0);
    loc_.push_back(0);
    refix_.push_back(0);
    status_.push_back(NodeStatus::terminated);
    cut_.push_back(std::numeric_limits<double>::quiet_NaN());
    log_volume_.push_back(log_volume);
    counts_.insert(counts_.end(), counts.begin(), counts.end());
    log_phi_.insert(log_phi_.end(), states_, std::numeric_limits<double>::quiet_NaN());
    return id;
}

void PartitionTree::enqueue_or_stop(int id, Rect rect, std::vector<std::uint32_t> indices) {
    if (should_terminate(depth_[id], total(id), stop_)) {
        status_[id] = NodeStatus::terminated;
        return;
    }
    status_[id] = NodeStatus::active;
    queue_.push_back(ActiveLeaf{id, std::move(rect), std::move(indices)});
}

std::uint64_t PartitionTree::total(int id) const {
    std::uint64_t s = 0;
    for (auto c : counts(id)) s += c;
    return s;
}

std::span<const double> PartitionTree::log_phi(int id) const {
    if (std::isnan(log_phi_[id * states_])) return {};
    return {log_phi_.data() + id * states_, static_cast<std::size_t>(states_)};
}

void PartitionTree::set_log_phi(int id, std::span<const double> log_phi) {
    if (log_phi.size() != static_cast<std::size_t>(states_)) throw std::invalid_argument("log_phi size mismatch");
    std::copy(log_phi.begin(), log_phi.end(), log_phi_.begin() + id * states_);
}

std::optional<int> PartitionTree::next_node_to_divide() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.front().node;
}

const PartitionTree::ActiveLeaf& PartitionTree::active(int id) const {
    if (!queue_.empty() && queue_.front().node == id) return queue_.front();
    for (const auto& leaf : queue_) {
        if (leaf.node == id) return leaf;
    }
    throw std::invalid_argument("node " + std::to_string(id) + " is not an active leaf");
}

std::pair<int, int> PartitionTree::apply_decision(int id, const Decision& dec, const Dataset& data) {
    if (id < 0 || static_cast<std::size_t>(id) >= size()) throw std::invalid_argument("apply_decision: bad node id");
    if (status_[id] == NodeStatus::internal) throw std::invalid_argument("apply_decision: node already divided");
    if (status_[id] == NodeStatus::terminated) throw std::invalid_argument("apply_decision: node is terminated");
    auto it = std::find_if(queue_.begin(), queue_.end(), [id](const ActiveLeaf& a) { return a.node == id; });
    ActiveLeaf leaf = std::move(*it);
    queue_.erase(it);

    auto [lrect, rrect] = split(leaf.rect, dec, grid_);
    const double c = lrect.upper[dec.dim];
    std::vector<std::uint32_t> lidx;
    std::vector<std::uint32_t> ridx;
    std::vector<std::uint32_t> lcount(groups_, 0);
    std::vector<std::uint32_t> rcount(groups_, 0);
    for (auto i : leaf.indices) {
        if (data.coord(i, dec.dim) <= c) {
            lidx.push_back(i);
            ++lcount[data.group(i)];
        } else {
            ridx.push_back(i);
            ++rcount[data.group(i)];
        }
    }

    status_[id] = NodeStatus::internal;
    dim_of_[id] = static_cast<std::int16_t>(dec.dim);
    loc_[id] = static_cast<std::int16_t>(dec.loc);
    refix_[id] = dec.refix ? 1 : 0;
    cut_[id] = c;
    const int depth = depth_[id] + 1;
    const int l = add_node(id, depth, lrect.log_volume, lcount);
    const int r = add_node(id, depth, rrect.log_volume, rcount);
    left_[id] = l;
    enqueue_or_stop(l, std::move(lrect), std::move(lidx));
    enqueue_or_stop(r, std::move(rrect), std::move(ridx));
    return {l, r};
}

void PartitionTree::terminate(int id) {
    auto it = std::find_if(queue_.begin(), queue_.end(), [id](const ActiveLeaf& a) { return a.node == id; });
    if (it == queue_.end()) throw std::invalid_argument("terminate: node is not active");
    queue_.erase(it);
    status_[id] = NodeStatus::terminated;
}

std::vector<int> PartitionTree::leaves() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < size(); ++i) {
        if (status_[i] != NodeStatus::internal) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> PartitionTree::internal_nodes() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < size(); ++i) {
        if (status_[i] == NodeStatus::internal) out.push_back(static_cast<int>(i));
    }
    return out;
}

int PartitionTree::find_leaf(std::span<const double> x) const {
    int id = 0;
    while (status_[id] == NodeStatus::internal) id = x[dim_of_[id]] <= cut_[id] ? left_[id] : left_[id] + 1;
    return id;
}

Rect PartitionTree::rect_of(int id) const {
    std::vector<int> path;
    for (int v = id; v >= 0; v = parent_[v]) path.push_back(v);
    Rect rect = Rect::unit(dim_);
    for (std::size_t k = path.size() - 1; k > 0; --k) {
        const int p = path[k];
        const int child = path[k - 1];
        if (child == left_[p]) {
            rect.upper[dim_of_[p]] = cut_[p];
        } else {
            rect.lower[dim_of_[p]] = cut_[p];
        }
    }
    rect.log_volume = log_volume_[id];
    return rect;
}

std::vector<PartitionTree::Record> PartitionTree::records() const {
    std::vector<Record> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
        const int id = static_cast<int>(i);
        out[i].parent = parent_[i];
        if (status_[i] == NodeStatus::internal) out[i].decision = decision(id);
        auto c = counts(id);
        out[i].counts.assign(c.begin(), c.end());
        out[i].status = status_[i];
    }
    return out;
}

PartitionTree PartitionTree::from_records(std::size_t dim, std::size_t groups, int grid, int num_states,
                                          StopConfig stop, const std::vector<Record>& records) {
    if (records.empty()) throw std::invalid_argument("tree records are empty");
    PartitionTree t;
    t.dim_ = dim;
    t.groups_ = groups;
    t.grid_ = grid;
    t.states_ = num_states;
    t.stop_ = stop;
    for (const auto& r : records) {
        if (r.counts.size() != groups) throw std::invalid_argument("tree record has wrong number of groups");
    }
    if (records[0].parent != -1) throw std::invalid_argument("first tree record must be the root");
    t.add_node(-1, 0, 0.0, records[0].counts);
    std::vector<Rect> rects{Rect::unit(dim)};
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i >= t.size()) throw std::invalid_argument("tree records reference a node before its parent splits");
        const auto& rec = records[i];
        if (static_cast<int>(i) > 0 && rec.parent != t.parent_[i])
            throw std::invalid_argument("tree records are not in creation order");
        if (!rec.decision) {
            t.status_[i] = NodeStatus::terminated;
            continue;
        }
        const Decision dec = *rec.decision;
        auto [lrect, rrect] = split(rects[i], dec, grid);
        const int id = static_cast<int>(i);
        t.status_[i] = NodeStatus::internal;
        t.dim_of_[i] = static_cast<std::int16_t>(dec.dim);
        t.loc_[i] = static_cast<std::int16_t>(dec.loc);
        t.refix_[i] = dec.refix ? 1 : 0;
        t.cut_[i] = lrect.upper[dec.dim];
        const std::size_t l = t.size();
        if (l + 1 >= records.size()) throw std::invalid_argument("tree records are missing children");
        const int depth = t.depth_[i] + 1;
        t.add_node(id, depth, lrect.log_volume, records[l].counts);
        t.add_node(id, depth, rrect.log_volume, records[l + 1].counts);
        t.left_[i] = static_cast<int>(l);
        rects.push_back(std::move(lrect));
        rects.push_back(std::move(rrect));
        std::vector<std::uint64_t> sum(groups, 0);
        for (std::size_t g = 0; g < groups; ++g) sum[g] = records[l].counts[g] + records[l + 1].counts[g];
        for (std::size_t g = 0; g < groups; ++g) {
            if (sum[g] != rec.counts[g]) throw std::invalid_argument("tree records: child counts do not add up");
        }
    }
    if (t.size() != records.size()) throw std::invalid_argument("tree records contain unreachable nodes");
    return t;
}

double log_decision_prior(const Decision& dec, std::size_t n_node, bool parent_refixed, std::size_t dim,
                          const TreePriorConfig& prior) {
    const auto log_lambda = log_dim_weights(prior, dim);
    double lp = log_lambda.at(dec.dim);
    if (!prior.spike) {
        if (dec.refix) return kNegInf;
        return lp + log_location_weights(n_node, prior).at(dec.loc - 1);
    }
    const auto sw = spike_weights(n_node, parent_refixed, prior);
    const int mid = prior.grid / 2;
    if (dec.refix) {
        if (dec.loc != mid) return kNegInf;
        return lp + sw.log_refix;
    }
    if (parent_refixed) return kNegInf;
    return lp + sw.log_no_refix + sw.log_slab.at(dec.loc - 1);
}

double log_tree_prior(const PartitionTree& tree, const TreePriorConfig& prior) {
    double total = 0.0;
    for (int id : tree.internal_nodes()) {
        const int p = tree.parent(id);
        const bool parent_refixed = p >= 0 && tree.decision(p).refix;
        const double lp = log_decision_prior(tree.decision(id), tree.total(id), parent_refixed, tree.dim(), prior);
        if (!std::isfinite(lp))
            throw std::invalid_argument("tree has a decision with zero prior probability at node " +
                                        std::to_string(id));
        total += lp;
    }
    return total;
}

nlohmann::ordered_json tree_to_json(const PartitionTree& tree) {
    nlohmann::ordered_json j;
    j["dim"] = tree.dim();
    j["groups"] = tree.groups();
    j["grid"] = tree.grid();
    auto nodes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const int id = static_cast<int>(i);
        nlohmann::ordered_json n;
        n["id"] = id;
        n["parent"] = tree.parent(id);
        n["depth"] = tree.depth(id);
        n["status"] = to_string(tree.status(id));
        const Rect r = tree.rect_of(id);
        n["lower"] = r.lower;
        n["upper"] = r.upper;
        n["log_volume"] = r.log_volume;
        n["counts"] = std::vector<std::uint32_t>(tree.counts(id).begin(), tree.counts(id).end());
        if (!tree.is_leaf(id)) {
            const Decision d = tree.decision(id);
            n["decision"] = {{"dim", d.dim}, {"loc", d.loc}, {"refix", d.refix}};
            n["cut"] = tree.cut(id);
            n["children"] = {tree.left(id), tree.right(id)};
        }
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    return j;
}

PartitionTree tree_from_json(const nlohmann::json& j, int num_states, StopConfig stop) {
    std::vector<PartitionTree::Record> recs;
    for (const auto& n : j.at("nodes")) {
        PartitionTree::Record r;
        r.parent = n.at("parent").get<int>();
        r.counts = n.at("counts").get<std::vector<std::uint32_t>>();
        const auto status = n.value("status", std::string("terminated"));
        r.status = status == "active" ? NodeStatus::active : NodeStatus::terminated;
        if (n.contains("decision")) {
            const auto& d = n["decision"];
            r.decision = Decision{d.at("dim").get<int>(), d.at("loc").get<int>(), d.value("refix", false)};
        }
        recs.push_back(std::move(r));
    }
    return PartitionTree::from_records(j.at("dim").get<std::size_t>(), j.at("groups").get<std::size_t>(),
                                       j.at("grid").get<int>(), num_states, stop, recs);
}

std::string tree_to_dot(const PartitionTree& tree) {
    std::ostringstream out;
    out.precision(6);
    out << "digraph partition_tree {\n  node [shape=box, fontname=\"Helvetica\"];\n";
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const int id = static_cast<int>(i);
        out << "  n" << id << " [label=\"#" << id << " n=" << tree.total(id);
        if (!tree.is_leaf(id)) {
            const Decision d = tree.decision(id);
            out << "\\nx" << d.dim << " <= " << tree.cut(id);
            if (d.refix) out << " (refix)";
        } else {
            out << "\\n" << to_string(tree.status(id));
        }
        out << "\"];\n";
    }
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const int id = static_cast<int>(i);
        if (tree.is_leaf(id)) continue;
        out << "  n" << id << " -> n" << tree.left(id) << ";\n";
        out << "  n" << id << " -> n" << tree.right(id) << ";\n";
    }
    out << "}\n";
    return out.str();
}

} // namespace hmpt
