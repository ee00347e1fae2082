#pragma once

#include "hmpt/geometry.hpp"

#include <vector>

namespace testutil {

inline hmpt::Dataset line(const std::vector<double>& xs) {
    hmpt::Dataset data(1, 1);
    for (double x : xs) data.add(std::span<const double>(&x, 1), 0);
    return data;
}

inline hmpt::Dataset line2(const std::vector<double>& a, const std::vector<double>& b) {
    hmpt::Dataset data(1, 2);
    for (double x : a) data.add(std::span<const double>(&x, 1), 0);
    for (double x : b) data.add(std::span<const double>(&x, 1), 1);
    return data;
}

}  // namespace testutil
