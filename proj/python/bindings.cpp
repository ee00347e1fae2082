// Python bindings: fit, predict and report on in-memory arrays.

#include "hmpt/bundle.hpp"
#include "hmpt/config.hpp"
#include "hmpt/io.hpp"
#include "hmpt/outputs.hpp"
#include "hmpt/tree.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

namespace py = pybind11;
using namespace hmpt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<std::vector<double>> rows_of(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array of shape (n, d)");
    const auto r = a.unchecked<2>();
    std::vector<std::vector<double>> out(r.shape(0), std::vector<double>(r.shape(1)));
    for (py::ssize_t i = 0; i < r.shape(0); ++i) {
        for (py::ssize_t j = 0; j < r.shape(1); ++j) out[i][j] = r(i, j);
    }
    return out;
}

class Fit {
public:
    Fit(const std::vector<Array>& groups, const std::string& config_json, bool two_sample, int threads)
        : threads_(threads) {
        RunConfig cfg = default_config(two_sample);
        if (!config_json.empty()) cfg = config_from_json(nlohmann::json::parse(config_json), cfg);
        std::vector<std::vector<std::vector<double>>> raw;
        for (const auto& g : groups) raw.push_back(rows_of(g));
        std::vector<std::string> labels;
        for (std::size_t g = 0; g < raw.size(); ++g) labels.push_back(std::to_string(g));
        std::vector<std::string> columns;
        for (std::size_t j = 0; j < (raw.empty() || raw[0].empty() ? 0 : raw[0][0].size()); ++j)
            columns.push_back("x" + std::to_string(j));
        input_ = std::make_unique<Ingested>(ingest_rows(raw, cfg.scaling, labels, columns));
        cfg.smc.threads = threads;
        py::gil_scoped_release release;
        fit_ = fit(input_->data, cfg);
    }

    /// Posterior predictive density on the scaled unit cube.
    py::array_t<double> density(const Array& points, bool scaled) const {
        const auto flat = flatten(points, scaled);
        PosteriorCache cache(fit_.posterior, 0, threads_);
        const auto d = predictive_density(cache, flat);
        return py::array_t<double>(d.size(), d.data());
    }

    double score(const Array& points, bool scaled) const {
        const auto flat = flatten(points, scaled);
        PosteriorCache cache(fit_.posterior, 0, threads_);
        return predictive_score(cache, flat);
    }

    double p_h0() const {
        require_two_sample();
        PosteriorCache cache(fit_.posterior, 0, threads_);
        return posterior_null_probability(cache);
    }

    std::string report(std::size_t top_k, std::size_t draws, bool conditional, std::size_t min_count) const {
        require_two_sample();
        PosteriorCache cache(fit_.posterior, 0, threads_);
        ReportOptions ro;
        ro.effect.draws = draws;
        ro.effect.conditional = conditional;
        ro.effect.seed = fit_.config.smc.seed;
        ro.min_node_count = min_count;
        return report_summary_json(two_sample_report(cache, fit_.map.index, ro), top_k).dump();
    }

    std::string map_tree_json() const { return tree_to_json(*fit_.posterior.trees.at(fit_.map.index)).dump(); }
    std::string map_tree_dot() const { return tree_to_dot(*fit_.posterior.trees.at(fit_.map.index)); }
    std::string config_json() const { return config_to_json(fit_.config).dump(); }
    std::vector<double> weights() const { return fit_.posterior.weights; }
    std::size_t map_index() const { return fit_.map.index; }
    double seconds() const { return fit_.seconds; }
    std::size_t dim() const { return input_->data.dim(); }

    void save(const std::string& dir) const { write_bundle(dir, fit_, *input_, "python", threads_); }

private:
    void require_two_sample() const {
        if (fit_.model->name() != "mrs") throw std::invalid_argument("needs a two-sample (mrs) fit");
    }

    std::vector<double> flatten(const Array& points, bool scaled) const {
        const auto rows = rows_of(points);
        std::vector<double> flat;
        for (const auto& x : rows) {
            if (x.size() != dim()) throw std::invalid_argument("points have the wrong number of columns");
            const auto u = scaled ? x : input_->scaling.apply(x);
            flat.insert(flat.end(), u.begin(), u.end());
        }
        return flat;
    }

    int threads_ = 1;
    std::unique_ptr<Ingested> input_;
    FitOutput fit_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hidden-Markov Polya tree models fitted by sequential Monte Carlo";

    py::register_exception<std::invalid_argument>(m, "HmptError", PyExc_ValueError);

    py::class_<Fit>(m, "Fit")
        .def(py::init<const std::vector<Array>&, const std::string&, bool, int>(), py::arg("groups"),
             py::arg("config_json") = "", py::arg("two_sample") = false, py::arg("threads") = 1)
        .def("density", &Fit::density, py::arg("points"), py::arg("scaled") = false)
        .def("score", &Fit::score, py::arg("points"), py::arg("scaled") = false)
        .def("p_h0", &Fit::p_h0)
        .def("report_json", &Fit::report, py::arg("top_k") = 10, py::arg("draws") = 1000,
             py::arg("conditional") = false, py::arg("min_count") = 0)
        .def("map_tree_json", &Fit::map_tree_json)
        .def("map_tree_dot", &Fit::map_tree_dot)
        .def("config_json", &Fit::config_json)
        .def("save", &Fit::save, py::arg("directory"))
        .def_property_readonly("weights", &Fit::weights)
        .def_property_readonly("map_index", &Fit::map_index)
        .def_property_readonly("seconds", &Fit::seconds)
        .def_property_readonly("dim", &Fit::dim);

    m.def(
        "simulate",
        [](const std::string& scenario, std::size_t n, std::size_t n2, std::size_t dim, std::uint64_t seed) {
            const auto sim = simulate(scenario, n, n2 == 0 ? n : n2, dim, seed);
            py::list out;
            for (const auto& g : sim.groups) {
                py::array_t<double> a({g.size(), sim.dim});
                auto w = a.mutable_unchecked<2>();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    for (std::size_t j = 0; j < sim.dim; ++j) w(i, j) = g[i][j];
                }
                out.append(a);
            }
            return out;
        },
        py::arg("scenario"), py::arg("n"), py::arg("n2") = 0, py::arg("dim") = 0, py::arg("seed") = 1);
    m.def("scenario_names", &scenario_names);
}
