#include "hmpt/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace hmpt {

RunConfig default_config(bool two_sample) {
    RunConfig cfg;
    cfg.model.kind = two_sample ? "mrs" : "apt";
    cfg.prior.eta = two_sample ? 0.1 : 0.01;
    return cfg;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["model"] = {
        {"kind", c.model.kind},
        {"pt", {{"alpha_scale", c.model.pt.alpha_scale}, {"depth_scaled", c.model.pt.depth_scaled}}},
        {"apt",
         {{"states", c.model.apt.states},
          {"beta", c.model.apt.beta},
          {"log10nu", {c.model.apt.log10_nu_lower, c.model.apt.log10_nu_upper}},
          {"grid_points", c.model.apt.grid_points}}},
        {"mrs", {{"gamma", c.model.mrs.gamma}, {"rho", c.model.mrs.rho}, {"nu0", c.model.mrs.nu0}}},
    };
    nlohmann::ordered_json prior;
    prior["n_l"] = c.prior.grid;
    prior["eta"] = c.prior.eta;
    if (c.prior.dim_weights.empty()) {
        prior["lambda"] = "uniform";
    } else {
        prior["lambda"] = c.prior.dim_weights;
    }
    prior["spike"] = c.prior.spike;
    prior["penalty"] = c.prior.penalty;
    j["prior"] = std::move(prior);
    j["smc"] = {{"particles", c.smc.particles},         {"max_depth", c.smc.stop.max_depth},
                {"min_count", c.smc.stop.min_count},    {"kappa", c.smc.kappa},
                {"ess_fraction", c.smc.ess_fraction},   {"seed", c.smc.seed},
                {"exact_final_weights", c.smc.exact_final_weights}};
    j["io"] = {{"scaling", c.scaling}, {"group_column", c.group_column}};
    j["report"] = {{"effect_draws", c.report.effect_draws},
                   {"conditional", c.report.conditional},
                   {"min_node_count", c.report.min_node_count},
                   {"top_k", c.report.top_k}};
    return j;
}

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument("config section '" + where + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw std::invalid_argument("unknown config key '" + where + "." + k + "'");
    }
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
    try {
        check_keys(j, {"model", "prior", "smc", "io", "report"}, "config");
        if (j.contains("model")) {
            const auto& m = j["model"];
            check_keys(m, {"kind", "pt", "apt", "mrs"}, "model");
            take(m, "kind", c.model.kind);
            if (m.contains("pt")) {
                check_keys(m["pt"], {"alpha_scale", "depth_scaled"}, "model.pt");
                take(m["pt"], "alpha_scale", c.model.pt.alpha_scale);
                take(m["pt"], "depth_scaled", c.model.pt.depth_scaled);
            }
            if (m.contains("apt")) {
                const auto& a = m["apt"];
                check_keys(a, {"states", "beta", "log10nu", "grid_points"}, "model.apt");
                take(a, "states", c.model.apt.states);
                take(a, "beta", c.model.apt.beta);
                take(a, "grid_points", c.model.apt.grid_points);
                if (a.contains("log10nu")) {
                    const auto r = a["log10nu"].get<std::vector<double>>();
                    if (r.size() != 2) throw std::invalid_argument("model.apt.log10nu must be [L, U]");
                    c.model.apt.log10_nu_lower = r[0];
                    c.model.apt.log10_nu_upper = r[1];
                }
            }
            if (m.contains("mrs")) {
                check_keys(m["mrs"], {"gamma", "rho", "nu0"}, "model.mrs");
                take(m["mrs"], "gamma", c.model.mrs.gamma);
                take(m["mrs"], "rho", c.model.mrs.rho);
                take(m["mrs"], "nu0", c.model.mrs.nu0);
            }
        }
        if (j.contains("prior")) {
            const auto& p = j["prior"];
            check_keys(p, {"n_l", "eta", "lambda", "spike", "penalty"}, "prior");
            take(p, "n_l", c.prior.grid);
            take(p, "eta", c.prior.eta);
            take(p, "spike", c.prior.spike);
            take(p, "penalty", c.prior.penalty);
            if (p.contains("lambda")) {
                if (p["lambda"].is_string()) {
                    if (p["lambda"].get<std::string>() != "uniform")
                        throw std::invalid_argument("prior.lambda must be \"uniform\" or a list");
                    c.prior.dim_weights.clear();
                } else {
                    c.prior.dim_weights = p["lambda"].get<std::vector<double>>();
                }
            }
        }
        if (j.contains("smc")) {
            const auto& s = j["smc"];
            check_keys(s, {"particles", "max_depth", "min_count", "kappa", "ess_fraction", "seed", "threads",
                           "exact_final_weights"},
                       "smc");
            take(s, "particles", c.smc.particles);
            take(s, "max_depth", c.smc.stop.max_depth);
            take(s, "min_count", c.smc.stop.min_count);
            take(s, "kappa", c.smc.kappa);
            take(s, "ess_fraction", c.smc.ess_fraction);
            take(s, "seed", c.smc.seed);
            take(s, "threads", c.smc.threads);
            take(s, "exact_final_weights", c.smc.exact_final_weights);
        }
        if (j.contains("io")) {
            check_keys(j["io"], {"scaling", "group_column"}, "io");
            take(j["io"], "scaling", c.scaling);
            take(j["io"], "group_column", c.group_column);
        }
        if (j.contains("report")) {
            const auto& r = j["report"];
            check_keys(r, {"effect_draws", "conditional", "min_node_count", "top_k"}, "report");
            take(r, "effect_draws", c.report.effect_draws);
            take(r, "conditional", c.report.conditional);
            take(r, "min_node_count", c.report.min_node_count);
            take(r, "top_k", c.report.top_k);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
    return c;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j, std::move(base));
}

} // namespace hmpt
