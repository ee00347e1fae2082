#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace hmpt {

/// Axis-aligned box (lower, upper] in (0,1]^d. Membership is strictly greater
/// than `lower` and at most `upper` in every coordinate, so a point sitting on a
/// cut belongs to the left child.
struct Rect {
    std::vector<double> lower;
    std::vector<double> upper;
    double log_volume = 0.0;

    static Rect unit(std::size_t dim);

    std::size_t dim() const { return lower.size(); }
    double volume() const;
    bool contains(std::span<const double> x) const;
};

/// Split choice for a node: dimension (0-based) and grid location loc/grid.
/// `refix` marks a midpoint split drawn from the spike of the spike-and-slab prior.
struct Decision {
    int dim = 0;
    int loc = 1;
    bool refix = false;

    friend bool operator==(const Decision&, const Decision&) = default;
};

/// Absolute coordinate of the cut a + (loc/grid)(b - a). Every caller that
/// needs to know which side of a cut a point falls on goes through here.
double cut_point(double lower, double upper, int loc, int grid);

void validate_decision(const Rect& rect, const Decision& dec, int grid);

/// Returns (left, right). Throws std::invalid_argument on a bad dimension,
/// an off-grid location or a degenerate rectangle.
std::pair<Rect, Rect> split(const Rect& rect, const Decision& dec, int grid);

/// Pooled points of G groups, row-major, with one group label per point.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t dim, std::size_t groups);

    /// Builds a dataset from per-group point lists; each point must lie in (0,1]^d.
    static Dataset from_groups(const std::vector<std::vector<std::vector<double>>>& groups);

    void add(std::span<const double> x, int group);

    std::size_t size() const { return labels_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t groups() const { return group_sizes_.size(); }
    std::size_t group_size(std::size_t g) const { return group_sizes_[g]; }
    bool empty() const { return labels_.empty(); }

    std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
    double coord(std::size_t i, std::size_t j) const { return coords_[i * dim_ + j]; }
    int group(std::size_t i) const { return labels_[i]; }

private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
    std::vector<int> labels_;
    std::vector<std::size_t> group_sizes_;
};

/// Per-group number of points inside `rect`, by a plain scan.
std::vector<std::uint32_t> count_in(const Rect& rect, const Dataset& data);

} // namespace hmpt
