// hmpt: command-line front end for fitting, predicting and reporting.

#include "hmpt/bundle.hpp"
#include "hmpt/config.hpp"
#include "hmpt/io.hpp"
#include "hmpt/outputs.hpp"
#include "hmpt/parallel.hpp"
#include "hmpt/tree.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

namespace {

using namespace hmpt;

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> particles;
    std::optional<int> max_depth;
    std::optional<std::size_t> min_count;
    std::optional<double> eta;
    std::optional<int> grid;
    std::optional<double> kappa;
    std::optional<std::string> model;
    std::optional<std::string> scaling;
    bool spike = false;
    int threads = 0;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON run config (default: $HMPT_CONFIG if set)");
    cmd->add_option("--seed", o.seed, "Master random seed");
    cmd->add_option("--particles", o.particles, "Number of particles M");
    cmd->add_option("--max-depth", o.max_depth, "Maximum tree depth K");
    cmd->add_option("--min-count", o.min_count, "Nodes with fewer points stop dividing");
    cmd->add_option("--eta", o.eta, "Tail decay of the location prior");
    cmd->add_option("--grid", o.grid, "Number of grid intervals N_L per split");
    cmd->add_option("--kappa", o.kappa, "Resampling temperature in (0,1]");
    cmd->add_option("--model", o.model, "pt | apt | mrs")->check(CLI::IsMember({"pt", "apt", "mrs"}));
    cmd->add_option("--scaling", o.scaling, "affine | rank | none")->check(CLI::IsMember({"affine", "rank", "none"}));
    cmd->add_flag("--spike", o.spike, "Enable the spike-and-slab midpoint prior");
    cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores); results do not depend on it");
}

RunConfig resolve(const Overrides& o, bool two_sample) {
    RunConfig cfg = default_config(two_sample);
    std::string path = o.config;
    if (path.empty()) {
        if (const char* env = std::getenv("HMPT_CONFIG")) path = env;
    }
    if (!path.empty()) cfg = load_config_file(path, cfg);
    if (o.seed) cfg.smc.seed = *o.seed;
    if (o.particles) cfg.smc.particles = *o.particles;
    if (o.max_depth) cfg.smc.stop.max_depth = *o.max_depth;
    if (o.min_count) cfg.smc.stop.min_count = *o.min_count;
    if (o.eta) cfg.prior.eta = *o.eta;
    if (o.grid) cfg.prior.grid = *o.grid;
    if (o.kappa) cfg.smc.kappa = *o.kappa;
    if (o.model) cfg.model.kind = *o.model;
    if (o.scaling) cfg.scaling = *o.scaling;
    if (o.spike) cfg.prior.spike = true;
    cfg.smc.threads = o.threads;
    return cfg;
}

void progress(const StepDiagnostics& d) {
    if (d.step % 100 == 0) {
        std::cerr << "step " << d.step << "  active " << d.active_particles << "  ess " << d.ess
                  << (d.resampled ? "  (resampled)" : "") << '\n';
    }
}

int run_fit(const Overrides& o, const std::vector<std::string>& data, const std::string& group_col,
            const std::string& out, bool two_sample, bool quiet) {
    RunConfig cfg = resolve(o, two_sample);
    if (!group_col.empty()) cfg.group_column = group_col;
    if (data.empty()) throw std::invalid_argument("--data is required");
    Ingested in = [&] {
        if (!two_sample) {
            if (data.size() != 1) throw std::invalid_argument("fit-density takes exactly one --data file");
            return ingest(data[0], cfg.scaling, cfg.group_column);
        }
        if (data.size() == 2) {
            if (!cfg.group_column.empty())
                throw std::invalid_argument("--group-col conflicts with two --data files");
            return ingest_groups(data, cfg.scaling);
        }
        if (cfg.group_column.empty())
            throw std::invalid_argument("fit-twosample needs two --data files or one file with --group-col");
        return ingest(data[0], cfg.scaling, cfg.group_column);
    }();
    if (two_sample && in.data.groups() != 2)
        throw std::invalid_argument("two-sample fit needs exactly 2 groups, found " +
                                    std::to_string(in.data.groups()));
    if (!two_sample && in.data.groups() != 1 && cfg.model.kind != "pt")
        throw std::invalid_argument("density fit with several groups needs --model pt");
    const auto result = fit(in.data, cfg, quiet ? StepCallback{} : StepCallback(progress));
    write_bundle(out, result, in, two_sample ? "fit-twosample" : "fit-density", resolve_threads(o.threads));
    const auto summary = read_json((std::filesystem::path(out) / "summary.json").string());
    std::cout << summary.dump(2) << '\n';
    return 0;
}

std::vector<double> scaled_points(const LoadedBundle& b, const std::string& path, std::size_t& clamped) {
    const auto rows = read_points(path);
    std::vector<double> flat;
    for (const auto& r : rows) {
        if (r.size() != b.dim)
            throw std::invalid_argument("points have " + std::to_string(r.size()) + " columns, the fit has " +
                                        std::to_string(b.dim));
        const auto x = b.scaling.apply(r, &clamped);
        flat.insert(flat.end(), x.begin(), x.end());
    }
    if (flat.empty()) throw std::invalid_argument("'" + path + "' has no points");
    return flat;
}

double log_jacobian(const Scaling& s) {
    double lj = 0.0;
    if (s.mode == "affine") {
        for (std::size_t j = 0; j < s.min.size(); ++j) lj -= std::log(s.max[j] - s.min[j] + s.eps[j]);
    }
    return lj;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hidden-Markov Polya tree models fitted by SMC over partition trees"};
    app.require_subcommand(1);

    Overrides o;
    std::vector<std::string> data;
    std::string group_col;
    std::string out;
    bool quiet = false;

    auto* fd = app.add_subcommand("fit-density", "Estimate a density and write a result bundle");
    fd->add_option("--data", data, "Input CSV")->required();
    fd->add_option("--out", out, "Result bundle directory")->required();
    fd->add_flag("--quiet", quiet, "No progress output");
    add_run_flags(fd, o);

    auto* ft = app.add_subcommand("fit-twosample", "Compare two groups and write a result bundle");
    ft->add_option("--data", data, "One CSV with --group-col, or two CSVs (one per group)")->required();
    ft->add_option("--group-col", group_col, "Group label column (name or 0-based index)");
    ft->add_option("--out", out, "Result bundle directory")->required();
    ft->add_flag("--quiet", quiet, "No progress output");
    add_run_flags(ft, o);

    std::string bundle;
    std::string points;
    int density_grid = 0;
    auto* pr = app.add_subcommand("predict", "Posterior predictive density at points or on a regular grid");
    pr->add_option("--bundle", bundle, "Result bundle directory")->required();
    auto* pts_opt = pr->add_option("--points", points, "CSV of points in original units");
    auto* grid_opt = pr->add_option("--density-grid", density_grid, "Evaluate on a regular grid with this many cells per axis");
    pts_opt->excludes(grid_opt);
    pr->add_option("--out", out, "Output CSV (default stdout)");

    auto* sc = app.add_subcommand("score", "Mean log predictive density of test points");
    sc->add_option("--bundle", bundle, "Result bundle directory")->required();
    sc->add_option("--points", points, "CSV of test points in original units")->required();

    std::size_t top_k = 10;
    std::size_t min_node = 0;
    bool conditional = false;
    std::size_t draws = 1000;
    auto* rp = app.add_subcommand("report", "Two-sample report for the MAP tree of a bundle");
    rp->add_option("--bundle", bundle, "Result bundle directory")->required();
    rp->add_option("--top-k", top_k, "Number of top nodes in the JSON summary");
    rp->add_option("--min-count", min_node, "Only list nodes holding at least this many points");
    rp->add_option("--draws", draws, "Monte Carlo draws per node for the effect size");
    rp->add_flag("--conditional", conditional, "Effect size given the decoupled state instead of PMAP-weighted");
    rp->add_option("--out", out, "Directory for report.csv and report.json (default: print JSON)");

    std::string format = "json";
    long particle = -1;
    auto* ex = app.add_subcommand("export-tree", "Export the MAP tree (or one particle's tree)");
    ex->add_option("--bundle", bundle, "Result bundle directory")->required();
    ex->add_option("--format", format, "json | dot")->check(CLI::IsMember({"json", "dot"}));
    ex->add_option("--particle", particle, "Particle index instead of the MAP tree");
    ex->add_option("--out", out, "Output file (default stdout)");

    std::string scenario;
    std::size_t n1 = 1000;
    std::size_t n2 = 0;
    std::size_t dim = 0;
    std::uint64_t sim_seed = 1;
    auto* sm = app.add_subcommand("simulate", "Draw a simulated data set");
    sm->add_option("--scenario", scenario, "Scenario name")->required()->check(CLI::IsMember(scenario_names()));
    sm->add_option("--n", n1, "Sample size (first group)");
    sm->add_option("--n2", n2, "Second group size for two-sample scenarios (default: --n)");
    sm->add_option("--dim", dim, "Dimension where the scenario allows it");
    sm->add_option("--seed", sim_seed, "Random seed");
    sm->add_option("--out", out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (fd->parsed()) return run_fit(o, data, "", out, false, quiet);
        if (ft->parsed()) return run_fit(o, data, group_col, out, true, quiet);

        if (sm->parsed()) {
            const auto sim = simulate(scenario, n1, n2 == 0 ? n1 : n2, dim, sim_seed);
            write_points_csv(out, sim);
            return 0;
        }

        const LoadedBundle b = load_bundle(bundle);
        if (pr->parsed()) {
            std::vector<double> flat;
            std::size_t clamped = 0;
            std::vector<std::vector<double>> coords;
            if (density_grid > 0) {
                if (b.dim > 3) throw std::invalid_argument("--density-grid supports at most 3 dimensions");
                std::size_t cells = 1;
                for (std::size_t j = 0; j < b.dim; ++j) cells *= density_grid;
                for (std::size_t c = 0; c < cells; ++c) {
                    std::size_t rest = c;
                    for (std::size_t j = 0; j < b.dim; ++j) {
                        flat.push_back((static_cast<double>(rest % density_grid) + 0.5) / density_grid);
                        rest /= density_grid;
                    }
                }
            } else {
                if (points.empty()) throw std::invalid_argument("predict needs --points or --density-grid");
                flat = scaled_points(b, points, clamped);
            }
            PosteriorCache cache(b.posterior, 0, resolve_threads(0));
            const auto dens = predictive_density(cache, flat);
            std::ofstream file;
            if (!out.empty()) {
                file.open(out);
                if (!file) throw std::invalid_argument("cannot write '" + out + "'");
            }
            std::ostream& os = out.empty() ? std::cout : file;
            os.precision(17);
            for (std::size_t j = 0; j < b.dim; ++j) os << 'u' << j << ',';
            os << "density\n";
            for (std::size_t i = 0; i < dens.size(); ++i) {
                for (std::size_t j = 0; j < b.dim; ++j) os << flat[i * b.dim + j] << ',';
                os << dens[i] << '\n';
            }
            if (clamped > 0) std::cerr << clamped << " point(s) outside the training range were clamped\n";
            return 0;
        }
        if (sc->parsed()) {
            std::size_t clamped = 0;
            const auto flat = scaled_points(b, points, clamped);
            PosteriorCache cache(b.posterior, 0, resolve_threads(0));
            const double score = predictive_score(cache, flat);
            nlohmann::ordered_json j{{"score", score},
                                     {"score_original_units", score + log_jacobian(b.scaling)},
                                     {"n", flat.size() / b.dim},
                                     {"clamped", clamped}};
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        if (rp->parsed()) {
            if (b.model->name() != "mrs") throw std::invalid_argument("report needs a two-sample (mrs) bundle");
            PosteriorCache cache(b.posterior, 0, resolve_threads(0));
            ReportOptions ro;
            ro.effect.draws = draws;
            ro.effect.conditional = conditional;
            ro.effect.seed = b.config.smc.seed;
            ro.min_node_count = min_node;
            const auto rep = two_sample_report(cache, b.map_index, ro);
            const auto summary = report_summary_json(rep, top_k);
            if (out.empty()) {
                std::cout << summary.dump(2) << '\n';
            } else {
                std::filesystem::create_directories(out);
                std::ofstream((std::filesystem::path(out) / "report.csv").string()) << report_rows_csv(rep);
                write_json((std::filesystem::path(out) / "report.json").string(), summary);
            }
            return 0;
        }
        if (ex->parsed()) {
            std::size_t idx = b.map_index;
            if (particle >= 0) {
                if (static_cast<std::size_t>(particle) >= b.posterior.trees.size())
                    throw std::invalid_argument("--particle out of range");
                idx = static_cast<std::size_t>(particle);
            }
            const auto& tree = *b.posterior.trees[idx];
            const std::string text = format == "dot" ? tree_to_dot(tree) : tree_to_json(tree).dump(2) + "\n";
            if (out.empty()) {
                std::cout << text;
            } else {
                std::ofstream f(out);
                if (!f) throw std::invalid_argument("cannot write '" + out + "'");
                f << text;
            }
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
