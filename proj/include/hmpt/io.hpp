#pragma once

#include "hmpt/geometry.hpp"
#include "hmpt/numeric.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace hmpt {

/// Raw numeric table read from CSV.
struct Table {
    std::vector<std::string> header;  ///< empty when the file has none
    std::size_t cols = 0;
    std::vector<std::vector<std::string>> cells;
};

/// RFC-4180 subset: comma separated, optional double quotes, '.' decimals.
/// The first row is a header when any of its cells is not a number.
Table read_csv(const std::string& path);
Table parse_csv(const std::string& text);

/// Parses a numeric cell; throws std::invalid_argument naming row and column.
double parse_number(const std::string& cell, std::size_t row, std::size_t col);

/// How raw columns are mapped into (0, 1].
struct Scaling {
    std::string mode = "affine";  ///< "affine" | "rank" | "none"
    std::vector<double> min;
    std::vector<double> max;
    std::vector<double> eps;
    /// Sorted training values per column (rank mode only).
    std::vector<std::vector<double>> reference;

    /// Maps one raw point; values landing outside (0, 1] are clamped and counted.
    std::vector<double> apply(const std::vector<double>& raw, std::size_t* clamped = nullptr) const;
};

/// Fits the scaling on the pooled rows (all groups together).
Scaling fit_scaling(const std::vector<std::vector<double>>& rows, const std::string& mode);

/// Rank transform of one column to (rank - 0.5) / n with average ranks for ties.
std::vector<double> rank_transform(const std::vector<double>& column);

nlohmann::ordered_json scaling_to_json(const Scaling& s);
Scaling scaling_from_json(const nlohmann::json& j);

/// Ingested data ready for fitting.
struct Ingested {
    Dataset data;
    Scaling scaling;
    std::vector<std::string> group_labels;
    std::vector<std::string> columns;
};

/// One file, optionally split into groups by a label column (name or 0-based index).
Ingested ingest(const std::string& path, const std::string& scaling, const std::string& group_column = "");
/// Raw rows per group; scaling is fitted on the pooled rows.
Ingested ingest_rows(const std::vector<std::vector<std::vector<double>>>& raw, const std::string& scaling,
                     std::vector<std::string> labels, std::vector<std::string> columns);
/// One file per group; scaling is fitted on the pooled rows.
Ingested ingest_groups(const std::vector<std::string>& paths, const std::string& scaling);

/// Numeric rows of a file, with an optional column to drop.
std::vector<std::vector<double>> read_points(const std::string& path, const std::string& drop_column = "");

// ------------------------------------------------------------- simulators

/// Simulated groups of raw points (not yet scaled).
struct Simulated {
    std::vector<std::vector<std::vector<double>>> groups;
    std::size_t dim = 0;
};

/// Scenario names: blocks, clusters, smooth, step (1-d jump at 0.25),
/// beta-mixture (d even), location-shift, dispersion, correlation, identical,
/// disjoint. Two-group scenarios use n1, n2.
Simulated simulate(const std::string& scenario, std::size_t n1, std::size_t n2, std::size_t dim,
                   std::uint64_t seed);

std::vector<std::string> scenario_names();
bool scenario_is_two_sample(const std::string& scenario);

/// Writes groups as CSV: x0..x{d-1} and, for several groups, a trailing "group" column.
void write_points_csv(const std::string& path, const Simulated& sim);

} // namespace hmpt
