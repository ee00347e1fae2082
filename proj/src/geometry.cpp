#include "hmpt/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hmpt {

Rect Rect::unit(std::size_t dim) {
    return Rect{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0), 0.0};
}

double Rect::volume() const { return std::exp(log_volume); }

bool Rect::contains(std::span<const double> x) const {
    for (std::size_t j = 0; j < lower.size(); ++j) {
        if (!(x[j] > lower[j] && x[j] <= upper[j])) return false;
    }
    return true;
}

double cut_point(double lower, double upper, int loc, int grid) {
    return lower + (static_cast<double>(loc) / grid) * (upper - lower);
}

void validate_decision(const Rect& rect, const Decision& dec, int grid) {
    if (dec.dim < 0 || static_cast<std::size_t>(dec.dim) >= rect.dim())
        throw std::invalid_argument("split: dimension " + std::to_string(dec.dim) + " out of range");
    if (grid < 2 || dec.loc < 1 || dec.loc >= grid)
        throw std::invalid_argument("split: location " + std::to_string(dec.loc) + " not on grid of " +
                                    std::to_string(grid));
    if (dec.refix && 2 * dec.loc != grid) throw std::invalid_argument("split: refixed decision must cut at 1/2");
    const double a = rect.lower[dec.dim];
    const double b = rect.upper[dec.dim];
    const double c = cut_point(a, b, dec.loc, grid);
    if (!(a < c && c < b)) throw std::invalid_argument("split: degenerate rectangle");
}

std::pair<Rect, Rect> split(const Rect& rect, const Decision& dec, int grid) {
    validate_decision(rect, dec, grid);
    const double c = cut_point(rect.lower[dec.dim], rect.upper[dec.dim], dec.loc, grid);
    const double frac = static_cast<double>(dec.loc) / grid;
    Rect left = rect;
    Rect right = rect;
    left.upper[dec.dim] = c;
    right.lower[dec.dim] = c;
    left.log_volume = rect.log_volume + std::log(frac);
    right.log_volume = rect.log_volume + std::log1p(-frac);
    return {std::move(left), std::move(right)};
}

Dataset::Dataset(std::size_t dim, std::size_t groups) : dim_(dim), group_sizes_(groups, 0) {
    if (groups == 0) throw std::invalid_argument("Dataset: at least one group required");
    if (dim == 0) throw std::invalid_argument("Dataset: dimension must be positive");
}

Dataset Dataset::from_groups(const std::vector<std::vector<std::vector<double>>>& groups) {
    if (groups.empty()) throw std::invalid_argument("Dataset: at least one group required");
    std::size_t dim = 0;
    for (const auto& g : groups) {
        if (!g.empty()) {
            dim = g.front().size();
            break;
        }
    }
    if (dim == 0) throw std::invalid_argument("Dataset: cannot infer dimension from empty groups");
    Dataset out(dim, groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (const auto& x : groups[g]) out.add(x, static_cast<int>(g));
    }
    return out;
}

void Dataset::add(std::span<const double> x, int group) {
    if (x.size() != dim_) throw std::invalid_argument("Dataset: point has wrong dimension");
    if (group < 0 || static_cast<std::size_t>(group) >= group_sizes_.size())
        throw std::invalid_argument("Dataset: group label out of range");
    for (double v : x) {
        if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("Dataset: coordinates must lie in (0,1]");
    }
    coords_.insert(coords_.end(), x.begin(), x.end());
    labels_.push_back(group);
    ++group_sizes_[group];
}

std::vector<std::uint32_t> count_in(const Rect& rect, const Dataset& data) {
    std::vector<std::uint32_t> counts(data.groups(), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (rect.contains(data.point(i))) ++counts[data.group(i)];
    }
    return counts;
}

} // namespace hmpt
