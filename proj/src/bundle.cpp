#include "hmpt/bundle.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

namespace hmpt {

namespace fs = std::filesystem;

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot write '" + path + "'");
    f << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
    }
}

FitOutput fit(const Dataset& data, const RunConfig& cfg, const StepCallback& on_step) {
    FitOutput out;
    out.config = cfg;
    out.model = make_model(cfg.model);
    const auto t0 = std::chrono::steady_clock::now();
    out.smc = run_smc(data, *out.model, cfg.prior, cfg.smc, on_step);
    out.posterior.model = out.model.get();
    out.posterior.weights = particle_weights(out.smc.particles);
    for (const auto& p : out.smc.particles) out.posterior.trees.push_back(p.tree);
    out.map = map_tree(out.posterior.trees, cfg.prior, *out.model);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

nlohmann::ordered_json compact_tree_json(const PartitionTree& tree) {
    nlohmann::ordered_json j;
    auto splits = nlohmann::ordered_json::array();
    for (int id : tree.internal_nodes()) {
        const Decision d = tree.decision(id);
        splits.push_back({id, d.dim, d.loc, d.refix ? 1 : 0});
    }
    std::vector<std::uint32_t> counts;
    for (std::size_t i = 0; i < tree.size(); ++i) {
        const auto c = tree.counts(static_cast<int>(i));
        counts.insert(counts.end(), c.begin(), c.end());
    }
    j["splits"] = std::move(splits);
    j["counts"] = std::move(counts);
    return j;
}

PartitionTree compact_tree_from_json(const nlohmann::json& j, std::size_t dim, std::size_t groups, int grid,
                                     int num_states) {
    const auto counts = j.at("counts").get<std::vector<std::uint32_t>>();
    if (counts.size() % groups != 0) throw std::invalid_argument("compact tree: counts length mismatch");
    const std::size_t nodes = counts.size() / groups;
    std::vector<PartitionTree::Record> recs(nodes);
    for (std::size_t i = 0; i < nodes; ++i) recs[i].counts.assign(counts.begin() + i * groups, counts.begin() + (i + 1) * groups);
    std::size_t next = 1;
    for (const auto& s : j.at("splits")) {
        const auto id = s.at(0).get<std::size_t>();
        if (id >= nodes || next + 2 > nodes) throw std::invalid_argument("compact tree: split out of range");
        recs[id].decision = Decision{s.at(1).get<int>(), s.at(2).get<int>(), s.at(3).get<int>() != 0};
        recs[next].parent = static_cast<int>(id);
        recs[next + 1].parent = static_cast<int>(id);
        next += 2;
    }
    if (next != nodes) throw std::invalid_argument("compact tree: node count does not match splits");
    return PartitionTree::from_records(dim, groups, grid, num_states, StopConfig{}, recs);
}

nlohmann::ordered_json population_to_json(const Posterior& post) {
    std::map<const PartitionTree*, std::size_t> ids;
    auto trees = nlohmann::ordered_json::array();
    std::vector<std::size_t> tree_of;
    for (const auto& t : post.trees) {
        auto [it, fresh] = ids.emplace(t.get(), trees.size());
        if (fresh) trees.push_back(compact_tree_json(*t));
        tree_of.push_back(it->second);
    }
    nlohmann::ordered_json j;
    const auto& first = *post.trees.at(0);
    j["dim"] = first.dim();
    j["groups"] = first.groups();
    j["grid"] = first.grid();
    j["particles"] = post.trees.size();
    j["tree_of_particle"] = tree_of;
    j["weights"] = post.weights;
    j["trees"] = std::move(trees);
    return j;
}

Posterior population_from_json(const nlohmann::json& j, const StateModel& model) {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto groups = j.at("groups").get<std::size_t>();
    const auto grid = j.at("grid").get<int>();
    std::vector<std::shared_ptr<const PartitionTree>> distinct;
    for (const auto& t : j.at("trees")) {
        distinct.push_back(
            std::make_shared<const PartitionTree>(compact_tree_from_json(t, dim, groups, grid, model.num_states())));
    }
    Posterior post;
    post.model = &model;
    for (auto k : j.at("tree_of_particle").get<std::vector<std::size_t>>()) post.trees.push_back(distinct.at(k));
    post.weights = j.at("weights").get<std::vector<double>>();
    if (post.weights.size() != post.trees.size()) throw std::invalid_argument("population: weights mismatch");
    return post;
}

void write_bundle(const std::string& dir, const FitOutput& fo, const Ingested& input, const std::string& command,
                  int threads) {
    fs::create_directories(dir);
    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
    write_json(path("config.json"), config_to_json(fo.config));
    write_json(path("scaling.json"), scaling_to_json(input.scaling));
    {
        std::ofstream f(path("diagnostics.jsonl"));
        for (const auto& d : fo.smc.diagnostics) {
            nlohmann::ordered_json j{{"step", d.step},
                                     {"active_particles", d.active_particles},
                                     {"ess", d.ess},
                                     {"resampled", d.resampled},
                                     {"min_log_weight", d.min_log_weight},
                                     {"max_log_weight", d.max_log_weight}};
            f << j.dump() << '\n';
        }
    }
    write_json(path("population.json"), population_to_json(fo.posterior));
    const auto& map_tree_ref = *fo.posterior.trees.at(fo.map.index);
    write_json(path("map_tree.json"), tree_to_json(map_tree_ref));

    nlohmann::ordered_json summary;
    summary["command"] = command;
    summary["n"] = input.data.size();
    summary["dim"] = input.data.dim();
    summary["groups"] = input.data.groups();
    summary["group_labels"] = input.group_labels;
    summary["columns"] = input.columns;
    summary["model"] = fo.model->name();
    summary["particles"] = fo.posterior.trees.size();
    summary["steps"] = fo.smc.steps;
    summary["resamples"] = fo.smc.resamples;
    summary["peak_node_count"] = fo.smc.peak_nodes;
    {
        std::map<const PartitionTree*, int> seen;
        for (const auto& t : fo.posterior.trees) seen.emplace(t.get(), 0);
        summary["distinct_trees"] = seen.size();
    }
    std::vector<double> w = fo.posterior.weights;
    summary["final_ess"] = ess(w);
    summary["map_index"] = fo.map.index;
    summary["map_log_score"] = fo.map.scores.at(fo.map.index);
    summary["map_internal_nodes"] = map_tree_ref.internal_nodes().size();

    if (fo.model->name() == "mrs") {
        PosteriorCache cache(fo.posterior, 0, threads);
        ReportOptions ro;
        ro.effect.draws = fo.config.report.effect_draws;
        ro.effect.conditional = fo.config.report.conditional;
        ro.effect.seed = fo.config.smc.seed;
        ro.min_node_count = fo.config.report.min_node_count;
        const auto rep = two_sample_report(cache, fo.map.index, ro);
        summary["p_h0"] = rep.p_h0;
        std::ofstream(path("report.csv")) << report_rows_csv(rep);
        write_json(path("report.json"), report_summary_json(rep, fo.config.report.top_k));
    }
    write_json(path("summary.json"), summary);
    write_json(path("timing.json"), {{"wall_seconds", fo.seconds}, {"threads", threads}});
}

LoadedBundle load_bundle(const std::string& dir) {
    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
    if (!fs::is_directory(dir)) throw std::invalid_argument("'" + dir + "' is not a result bundle directory");
    LoadedBundle b;
    b.config = config_from_json(read_json(path("config.json")), RunConfig{});
    b.scaling = scaling_from_json(read_json(path("scaling.json")));
    b.model = make_model(b.config.model);
    const auto pop = read_json(path("population.json"));
    b.posterior = population_from_json(pop, *b.model);
    b.dim = pop.at("dim").get<std::size_t>();
    b.groups = pop.at("groups").get<std::size_t>();
    b.map_index = read_json(path("summary.json")).at("map_index").get<std::size_t>();
    return b;
}

} // namespace hmpt
