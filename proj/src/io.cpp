#include "hmpt/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hmpt {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cell);
            cell.clear();
        } else {
            cell += ch;
        }
    }
    if (quoted) throw std::invalid_argument("unterminated quote in CSV line");
    out.push_back(cell);
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool is_number(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    double v = 0.0;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [p, ec] = std::from_chars(first, t.data() + t.size(), v);
    return ec == std::errc() && p == t.data() + t.size() && std::isfinite(v);
}

}  // namespace

double parse_number(const std::string& cell, std::size_t row, std::size_t col) {
    const std::string t = trim(cell);
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && *first == '+') ++first;
    auto [p, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
        throw std::invalid_argument("non-numeric value '" + cell + "' at row " + std::to_string(row + 1) +
                                    ", column " + std::to_string(col + 1));
    return v;
}

Table parse_csv(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        for (auto& c : cells) c = trim(c);
        if (first) {
            first = false;
            t.cols = cells.size();
            const bool header = std::any_of(cells.begin(), cells.end(), [](const auto& c) { return !is_number(c); });
            if (header) {
                t.header = std::move(cells);
                continue;
            }
        }
        if (cells.size() != t.cols)
            throw std::invalid_argument("CSV row " + std::to_string(t.cells.size() + 1) + " has " +
                                        std::to_string(cells.size()) + " cells, expected " + std::to_string(t.cols));
        t.cells.push_back(std::move(cells));
    }
    return t;
}

Table read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

std::vector<double> rank_transform(const std::vector<double>& column) {
    const std::size_t n = column.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return column[a] < column[b]; });
    std::vector<double> out(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t k = i;
        while (k + 1 < n && column[order[k + 1]] == column[order[i]]) ++k;
        // 1-based ranks i+1..k+1 share their average.
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(k + 1));
        for (std::size_t r = i; r <= k; ++r) out[order[r]] = (avg - 0.5) / static_cast<double>(n);
        i = k + 1;
    }
    return out;
}

Scaling fit_scaling(const std::vector<std::vector<double>>& rows, const std::string& mode) {
    if (mode != "affine" && mode != "rank" && mode != "none")
        throw std::invalid_argument("unknown scaling '" + mode + "' (expected affine, rank or none)");
    if (rows.size() < 2) throw std::invalid_argument("need at least 2 rows of data");
    const std::size_t d = rows[0].size();
    Scaling s;
    s.mode = mode;
    if (mode == "none") return s;
    if (mode == "rank") {
        s.reference.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            for (const auto& r : rows) s.reference[j].push_back(r[j]);
            std::sort(s.reference[j].begin(), s.reference[j].end());
        }
        return s;
    }
    s.min.assign(d, 0.0);
    s.max.assign(d, 0.0);
    s.eps.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = rows[0][j];
        double hi = rows[0][j];
        for (const auto& r : rows) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
        }
        if (!(hi > lo))
            throw std::invalid_argument("column " + std::to_string(j + 1) +
                                        " is constant; affine scaling is undefined (use --scaling rank)");
        s.min[j] = lo;
        s.max[j] = hi;
        s.eps[j] = 1e-9 * (hi - lo);
    }
    return s;
}

std::vector<double> Scaling::apply(const std::vector<double>& raw, std::size_t* clamped) const {
    std::vector<double> out(raw.size());
    bool clipped = false;
    for (std::size_t j = 0; j < raw.size(); ++j) {
        double v = raw[j];
        if (mode == "affine") {
            v = (raw[j] - min[j] + eps[j]) / (max[j] - min[j] + eps[j]);
        } else if (mode == "rank") {
            const auto& ref = reference[j];
            const auto lo = std::lower_bound(ref.begin(), ref.end(), raw[j]);
            const auto hi = std::upper_bound(ref.begin(), ref.end(), raw[j]);
            const double less = static_cast<double>(lo - ref.begin());
            const double eq = static_cast<double>(hi - lo);
            const double rank = eq > 0 ? less + 0.5 * (eq + 1.0) : less + 0.5;
            v = (rank - 0.5) / static_cast<double>(ref.size());
        }
        if (!(v > 0.0)) {
            v = std::nextafter(0.0, 1.0);
            clipped = true;
        } else if (v > 1.0) {
            v = 1.0;
            clipped = true;
        }
        out[j] = v;
    }
    if (clipped && clamped) ++*clamped;
    return out;
}

nlohmann::ordered_json scaling_to_json(const Scaling& s) {
    nlohmann::ordered_json j;
    j["mode"] = s.mode;
    if (s.mode == "affine") {
        j["min"] = s.min;
        j["max"] = s.max;
        j["eps"] = s.eps;
    } else if (s.mode == "rank") {
        j["reference"] = s.reference;
    }
    return j;
}

Scaling scaling_from_json(const nlohmann::json& j) {
    Scaling s;
    s.mode = j.at("mode").get<std::string>();
    if (s.mode == "affine") {
        s.min = j.at("min").get<std::vector<double>>();
        s.max = j.at("max").get<std::vector<double>>();
        s.eps = j.at("eps").get<std::vector<double>>();
    } else if (s.mode == "rank") {
        s.reference = j.at("reference").get<std::vector<std::vector<double>>>();
    }
    return s;
}

namespace {

std::size_t resolve_column(const Table& t, const std::string& name) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c] == name) return c;
    }
    if (is_number(name)) {
        const double v = std::stod(name);
        if (v >= 0 && v < static_cast<double>(t.cols) && v == std::floor(v)) return static_cast<std::size_t>(v);
    }
    throw std::invalid_argument("group column '" + name + "' not found");
}

}  // namespace

Ingested ingest_rows(const std::vector<std::vector<std::vector<double>>>& raw, const std::string& scaling,
                     std::vector<std::string> labels, std::vector<std::string> columns) {
    std::vector<std::vector<double>> pooled;
    for (const auto& g : raw) pooled.insert(pooled.end(), g.begin(), g.end());
    if (pooled.size() < 2) throw std::invalid_argument("need at least 2 rows of data");
    const Scaling s = fit_scaling(pooled, scaling);
    Dataset data(pooled[0].size(), raw.size());
    if (scaling == "rank") {
        // Training points get exact average ranks over the pooled sample.
        const std::size_t d = pooled[0].size();
        std::vector<std::vector<double>> ranked(pooled.size(), std::vector<double>(d));
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<double> col(pooled.size());
            for (std::size_t i = 0; i < pooled.size(); ++i) col[i] = pooled[i][j];
            const auto r = rank_transform(col);
            for (std::size_t i = 0; i < pooled.size(); ++i) ranked[i][j] = r[i];
        }
        std::size_t k = 0;
        for (std::size_t g = 0; g < raw.size(); ++g) {
            for (std::size_t i = 0; i < raw[g].size(); ++i) data.add(ranked[k++], static_cast<int>(g));
        }
    } else {
        for (std::size_t g = 0; g < raw.size(); ++g) {
            for (const auto& x : raw[g]) {
                if (scaling == "none") {
                    for (double v : x) {
                        if (!(v > 0.0 && v <= 1.0))
                            throw std::invalid_argument("scaling 'none' needs every value in (0,1]");
                    }
                    data.add(x, static_cast<int>(g));
                } else {
                    data.add(s.apply(x), static_cast<int>(g));
                }
            }
        }
    }
    return Ingested{std::move(data), s, std::move(labels), std::move(columns)};
}

std::vector<std::vector<double>> read_points(const std::string& path, const std::string& drop_column) {
    const Table t = read_csv(path);
    std::size_t drop = t.cols;
    if (!drop_column.empty()) drop = resolve_column(t, drop_column);
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < t.cells.size(); ++r) {
        std::vector<double> x;
        for (std::size_t c = 0; c < t.cols; ++c) {
            if (c != drop) x.push_back(parse_number(t.cells[r][c], r, c));
        }
        rows.push_back(std::move(x));
    }
    return rows;
}

Ingested ingest(const std::string& path, const std::string& scaling, const std::string& group_column) {
    const Table t = read_csv(path);
    if (t.cells.size() < 2) throw std::invalid_argument("'" + path + "' has fewer than 2 data rows");
    std::size_t gcol = t.cols;
    if (!group_column.empty()) gcol = resolve_column(t, group_column);
    std::vector<std::string> columns;
    for (std::size_t c = 0; c < t.cols; ++c) {
        if (c != gcol) columns.push_back(t.header.empty() ? "x" + std::to_string(columns.size()) : t.header[c]);
    }
    if (columns.empty()) throw std::invalid_argument("no numeric columns");
    std::vector<std::string> labels;
    std::map<std::string, std::size_t> label_index;
    std::vector<std::vector<std::vector<double>>> raw;
    if (gcol == t.cols) {
        labels.push_back("all");
        raw.resize(1);
    }
    for (std::size_t r = 0; r < t.cells.size(); ++r) {
        std::vector<double> x;
        std::size_t g = 0;
        for (std::size_t c = 0; c < t.cols; ++c) {
            if (c == gcol) {
                auto [it, fresh] = label_index.emplace(t.cells[r][c], labels.size());
                if (fresh) {
                    labels.push_back(t.cells[r][c]);
                    raw.emplace_back();
                }
                g = it->second;
            } else {
                x.push_back(parse_number(t.cells[r][c], r, c));
            }
        }
        raw[g].push_back(std::move(x));
    }
    return ingest_rows(raw, scaling, std::move(labels), std::move(columns));
}

Ingested ingest_groups(const std::vector<std::string>& paths, const std::string& scaling) {
    std::vector<std::vector<std::vector<double>>> raw;
    std::size_t d = 0;
    for (const auto& p : paths) {
        raw.push_back(read_points(p));
        if (raw.back().empty()) throw std::invalid_argument("'" + p + "' has no data rows");
        if (d == 0) d = raw.back()[0].size();
        if (raw.back()[0].size() != d) throw std::invalid_argument("group files have different column counts");
    }
    std::vector<std::string> columns;
    for (std::size_t j = 0; j < d; ++j) columns.push_back("x" + std::to_string(j));
    return ingest_rows(raw, scaling, paths, std::move(columns));
}

// ------------------------------------------------------------- simulators

namespace {

struct Gen {
    StreamRng rng;
    std::normal_distribution<double> normal{0.0, 1.0};

    double uniform(double a, double b) { return a + (b - a) * rng.uniform(); }
    double unit() {
        double u = rng.uniform();
        while (u == 0.0) u = rng.uniform();
        return u;  // (0, 1)
    }
    double beta(double a, double b) { return sample_beta(a, b, rng); }
    double gauss() { return normal(rng); }
    std::size_t pick(std::size_t k) { return std::min(k - 1, static_cast<std::size_t>(rng.uniform() * k)); }
};

std::vector<double> blocks(Gen& g) {
    static const double box[3][4] = {{0.1, 0.45, 0.35, 0.9}, {0.2, 0.8, 0.45, 0.5}, {0.7, 0.9, 0.05, 0.6}};
    const auto& b = box[g.pick(3)];
    return {g.uniform(b[0], b[1]), g.uniform(b[2], b[3])};
}

std::vector<double> clusters(Gen& g) {
    const double u = g.rng.uniform();
    if (u < 0.1) return {g.unit(), g.unit()};
    if (u < 0.4) return {g.beta(15, 45), g.beta(15, 45)};
    if (u < 0.7) return {g.beta(45, 15), g.beta(22.5, 37.5)};
    return {g.beta(37.5, 22.5), g.beta(45, 15)};
}

// One coordinate pair from the three-component Gaussian mixture; the second
// group's first component may be shifted or have its variances changed.
std::vector<double> mixture_pair(Gen& g, double shift, double var_delta, bool second_group) {
    static const double mu[3][2] = {{-2.5, 1.0}, {1.0, -2.0}, {2.0, 2.5}};
    const double var[2] = {0.5, 0.7};
    const std::size_t k = g.pick(3);
    double m0 = mu[k][0];
    double m1 = mu[k][1];
    double v0 = var[0];
    double v1 = var[1];
    if (k == 0 && second_group) {
        m0 += shift;
        m1 += shift;
        v0 += var_delta;
        v1 += var_delta;
    }
    return {m0 + std::sqrt(v0) * g.gauss(), m1 + std::sqrt(v1) * g.gauss()};
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

std::vector<std::string> scenario_names() {
    return {"blocks", "clusters", "smooth", "step", "beta-mixture", "location-shift", "dispersion", "correlation",
            "identical", "disjoint"};
}

bool scenario_is_two_sample(const std::string& s) {
    return s == "location-shift" || s == "dispersion" || s == "correlation" || s == "identical" || s == "disjoint";
}

Simulated simulate(const std::string& scenario, std::size_t n1, std::size_t n2, std::size_t dim,
                   std::uint64_t seed) {
    const auto names = scenario_names();
    if (std::find(names.begin(), names.end(), scenario) == names.end())
        throw std::invalid_argument("unknown scenario '" + scenario + "'");
    Gen g{StreamRng(seed, 0x5157ULL, fnv1a(scenario))};
    Simulated out;
    if (!scenario_is_two_sample(scenario)) {
        out.groups.resize(1);
        auto& pts = out.groups[0];
        if (scenario == "blocks" || scenario == "clusters" || scenario == "smooth") {
            out.dim = 2;
            for (std::size_t i = 0; i < n1; ++i) {
                if (scenario == "blocks") pts.push_back(blocks(g));
                else if (scenario == "clusters") pts.push_back(clusters(g));
                else pts.push_back({g.beta(10, 20), g.beta(10, 20)});
            }
        } else if (scenario == "step") {
            // Density 3.2 on (0, 0.25], 4/15 on (0.25, 1].
            out.dim = 1;
            for (std::size_t i = 0; i < n1; ++i) {
                const double x = g.rng.uniform() < 0.8 ? g.uniform(0.0, 0.25) : g.uniform(0.25, 1.0);
                pts.push_back({std::max(x, 1e-12)});
            }
        } else {
            if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("beta-mixture needs an even dimension");
            out.dim = dim;
            for (std::size_t i = 0; i < n1; ++i) {
                std::vector<double> x(dim);
                for (std::size_t j = 1; j <= dim / 2; ++j) {
                    const double p = 0.25 + 0.7 / static_cast<double>(j);
                    const double a = 50.0 / static_cast<double>(j);
                    if (g.rng.uniform() < p) {
                        x[2 * j - 2] = g.beta(0.25, 1.0);
                        x[2 * j - 1] = g.beta(0.25, 1.0);
                    } else {
                        x[2 * j - 2] = g.beta(a, a);
                        x[2 * j - 1] = g.beta(a, a);
                    }
                }
                for (double& v : x) v = std::clamp(v, 1e-300, 1.0);
                pts.push_back(std::move(x));
            }
        }
        return out;
    }

    out.groups.resize(2);
    if (scenario == "identical" || scenario == "disjoint") {
        out.dim = dim == 0 ? 2 : dim;
        for (int grp = 0; grp < 2; ++grp) {
            const std::size_t n = grp == 0 ? n1 : n2;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> x(out.dim);
                for (auto& v : x) v = g.beta(2.0, 2.0);
                if (scenario == "disjoint") x[0] = grp == 0 ? 0.5 * x[0] : 0.5 + 0.5 * x[0];
                out.groups[grp].push_back(std::move(x));
            }
        }
        return out;
    }
    // 50-dimensional pairs; the first five pairs differ between groups.
    const std::size_t pairs = dim == 0 ? 25 : dim / 2;
    if (dim != 0 && dim % 2 != 0) throw std::invalid_argument("two-sample scenarios need an even dimension");
    out.dim = 2 * pairs;
    for (int grp = 0; grp < 2; ++grp) {
        const std::size_t n = grp == 0 ? n1 : n2;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> x(out.dim);
            for (std::size_t j = 0; j < pairs; ++j) {
                const bool active = j < 5 && grp == 1;
                std::vector<double> p;
                if (scenario == "location-shift") {
                    p = mixture_pair(g, active ? -0.5 : 0.0, 0.0, active);
                } else if (scenario == "dispersion") {
                    p = mixture_pair(g, 0.0, active ? -0.4 : 0.0, active);
                } else {
                    const double rho = active ? 0.75 : 0.0;
                    const double z0 = g.gauss();
                    const double z1 = g.gauss();
                    p = {z0, rho * z0 + std::sqrt(1.0 - rho * rho) * z1};
                }
                x[2 * j] = p[0];
                x[2 * j + 1] = p[1];
            }
            out.groups[grp].push_back(std::move(x));
        }
    }
    return out;
}

void write_points_csv(const std::string& path, const Simulated& sim) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot write '" + path + "'");
    f.precision(17);
    for (std::size_t j = 0; j < sim.dim; ++j) f << (j ? "," : "") << 'x' << j;
    if (sim.groups.size() > 1) f << ",group";
    f << '\n';
    for (std::size_t g = 0; g < sim.groups.size(); ++g) {
        for (const auto& x : sim.groups[g]) {
            for (std::size_t j = 0; j < x.size(); ++j) f << (j ? "," : "") << x[j];
            if (sim.groups.size() > 1) f << ',' << g;
            f << '\n';
        }
    }
}

} // namespace hmpt
