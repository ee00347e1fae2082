#pragma once

#include "hmpt/config.hpp"
#include "hmpt/io.hpp"
#include "hmpt/message_passing.hpp"
#include "hmpt/outputs.hpp"
#include "hmpt/smc.hpp"

#include <memory>
#include <string>

#include <json.hpp>

namespace hmpt {

struct FitOutput {
    RunConfig config;
    std::unique_ptr<StateModel> model;
    SmcResult smc;
    Posterior posterior;
    MapResult map;
    double seconds = 0.0;
};

/// Runs the sampler and picks the MAP tree.
FitOutput fit(const Dataset& data, const RunConfig& cfg, const StepCallback& on_step = {});

/// Compact population: distinct trees (decisions plus node counts) and per-particle tree ids and weights.
nlohmann::ordered_json population_to_json(const Posterior& post);
Posterior population_from_json(const nlohmann::json& j, const StateModel& model);

nlohmann::ordered_json compact_tree_json(const PartitionTree& tree);
PartitionTree compact_tree_from_json(const nlohmann::json& j, std::size_t dim, std::size_t groups, int grid,
                                     int num_states);

/// Writes config.json, scaling.json, diagnostics.jsonl, population.json,
/// map_tree.json, summary.json and timing.json (the only file that varies
/// between identical runs). Two-sample fits also get report.csv and report.json.
void write_bundle(const std::string& dir, const FitOutput& fit, const Ingested& input, const std::string& command,
                  int threads);

struct LoadedBundle {
    RunConfig config;
    Scaling scaling;
    std::unique_ptr<StateModel> model;
    Posterior posterior;
    std::size_t map_index = 0;
    std::size_t dim = 0;
    std::size_t groups = 1;
};

LoadedBundle load_bundle(const std::string& dir);

/// Writes JSON with a trailing newline.
void write_json(const std::string& path, const nlohmann::ordered_json& j);
nlohmann::json read_json(const std::string& path);

} // namespace hmpt
