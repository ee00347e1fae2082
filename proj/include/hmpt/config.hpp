#pragma once

#include "hmpt/models.hpp"
#include "hmpt/priors.hpp"
#include "hmpt/smc.hpp"

#include <string>

#include <json.hpp>

namespace hmpt {

struct ReportConfig {
    std::size_t effect_draws = 1000;
    bool conditional = false;
    std::size_t min_node_count = 0;
    std::size_t top_k = 10;
};

/// Everything that determines a run. `smc.threads` is deliberately left out
/// of the serialized snapshot because results do not depend on it.
struct RunConfig {
    ModelConfig model;
    TreePriorConfig prior;
    SmcConfig smc;
    std::string scaling = "affine";
    std::string group_column;
    ReportConfig report;
};

/// Defaults for a task: eta 0.01 with the adaptive model for density
/// estimation, eta 0.1 with the scanning model for two-sample comparison.
RunConfig default_config(bool two_sample);

nlohmann::ordered_json config_to_json(const RunConfig& cfg);
/// Overlays keys present in `j` onto `base`; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base);
RunConfig load_config_file(const std::string& path, RunConfig base);

} // namespace hmpt
