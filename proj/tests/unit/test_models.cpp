#include "hmpt/models.hpp"

#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <vector>

using namespace hmpt;

namespace {

std::vector<double> marginals(const StateModel& m, std::vector<std::uint32_t> l, std::vector<std::uint32_t> r,
                              SplitContext ctx) {
    std::vector<double> out(m.num_states());
    m.log_marginals(SplitCounts{l, r}, ctx, out);
    return out;
}

double quad_beta_binomial(double a, double b, int nl, int nr) {
    // Above 1/2 the second argument is 1 - t without cancellation.
    boost::math::quadrature::tanh_sinh<double> q;
    auto kernel = [](double p, double r) {
        return [p, r](double t, double tc) { return std::pow(t, p) * std::pow(t <= 0.5 ? 1 - t : tc, r); };
    };
    auto f = kernel(a - 1 + nl, b - 1 + nr);
    auto g = kernel(a - 1, b - 1);
    return std::log(q.integrate(f, 0.0, 1.0) / q.integrate(g, 0.0, 1.0));
}

double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

}  // namespace

TEST_CASE("beta-binomial marginal") {
    const BetaSplitPrior flat{1.0, 1.0};
    CHECK(beta_binomial_log_marginal(flat, 0, 0) == 0.0);
    CHECK(beta_binomial_log_marginal(flat, 1, 0) == doctest::Approx(std::log(0.5)));
    CHECK(beta_binomial_log_marginal(flat, 2, 1) == doctest::Approx(std::log(1.0 / 12.0)).epsilon(1e-13));
    CHECK(beta_binomial_log_marginal(flat, 2, 1) == doctest::Approx(quad_beta_binomial(1, 1, 2, 1)).epsilon(1e-12));
    CHECK(beta_binomial_log_marginal({2.5, 0.7}, 6, 3) == doctest::Approx(quad_beta_binomial(2.5, 0.7, 6, 3)).epsilon(1e-9));
}

TEST_CASE("plain Polya tree") {
    PlainPtModel flat({1.0, false});
    CHECK(marginals(flat, {3}, {2}, {0, 1, 2})[0] == doctest::Approx(std::log(1.0 / 60.0)).epsilon(1e-13));
    PlainPtModel pt;
    CHECK(pt.alpha(0) == doctest::Approx(0.1));
    CHECK(pt.alpha(2) == doctest::Approx(0.9));
    pt.prepare({200, 2, 15});
    for (int depth = 0; depth < 15; ++depth) {
        for (std::uint32_t n : {0u, 1u, 17u, 150u}) {
            const double v = marginals(pt, {n}, {n / 3}, {depth, 1, 2})[0];
            CHECK(std::isfinite(v));
            CHECK(v <= 0.0);
        }
    }
}

TEST_CASE("models put unit mass on empty splits") {
    for (const char* kind : {"pt", "apt", "mrs"}) {
        ModelConfig cfg;
        cfg.kind = kind;
        auto m = make_model(cfg);
        m->prepare({50, 8, 15});
        const std::size_t g = m->required_groups() == 2 ? 2 : 1;
        const std::vector<std::uint32_t> zero(g, 0);
        for (double v : marginals(*m, zero, zero, {3, 5, 8})) CHECK(v == 0.0);
    }
}

TEST_CASE("transition rows are stochastic and the top state absorbs") {
    for (const char* kind : {"pt", "apt", "mrs"}) {
        ModelConfig cfg;
        cfg.kind = kind;
        auto m = make_model(cfg);
        const int n = m->num_states();
        for (int depth = 0; depth <= 15; ++depth) {
            const auto xi = m->transition(depth);
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += xi[i * n + j];
                CHECK(std::abs(s - 1.0) < 1e-12);
            }
            CHECK(xi[n * n - 1] == 1.0);
        }
    }
}

TEST_CASE("APT grid average") {
    AptModel apt;
    apt.prepare({40, 2, 15});
    const auto v = marginals(apt, {10}, {10}, {0, 1, 2});
    CHECK(v[4] == doctest::Approx(-20.0 * std::log(2.0)).epsilon(1e-13));
    for (int s = 0; s < 4; ++s) {
        const auto& nu = apt.nu_grid(s);
        REQUIRE(nu.size() == 5);
        double acc = 0.0;
        for (double x : nu) acc += std::exp(lbeta(0.5 * x + 10, 0.5 * x + 10) - lbeta(0.5 * x, 0.5 * x));
        CHECK(v[s] == doctest::Approx(std::log(acc / 5.0)).epsilon(1e-11));
    }
    // State 0 covers (-1, 0.25] in log10; grid points sit at right endpoints of five sub-intervals.
    CHECK(std::log10(apt.nu_grid(0).front()) == doctest::Approx(-0.75));
    CHECK(std::log10(apt.nu_grid(0).back()) == doctest::Approx(0.25));
    CHECK(std::log10(apt.nu_grid(3).back()) == doctest::Approx(4.0));
}

TEST_CASE("APT approaches the fixed state as the precision grows") {
    AptOptions opts;
    opts.states = 2;
    opts.log10_nu_lower = 8.0 - 1e-9;
    opts.log10_nu_upper = 8.0;
    opts.grid_points = 1;
    AptModel apt(opts);
    apt.prepare({60, 4, 15});
    const auto v = marginals(apt, {7}, {30}, {0, 1, 4});
    CHECK(std::abs(std::expm1(v[0] - v[1])) < 1e-3);
}

TEST_CASE("APT fixed state ignores the counts") {
    AptModel apt;
    CHECK(apt.expected_theta(4, 0, SplitCounts{std::vector<std::uint32_t>{9}, std::vector<std::uint32_t>{1}},
                             {0, 1, 4}) == doctest::Approx(0.25));
}

TEST_CASE("conjugate posterior mean") {
    PlainPtModel flat({1.0, false});
    const std::vector<std::uint32_t> l{3}, r{1};
    CHECK(flat.expected_theta(0, 0, {l, r}, {0, 1, 2}) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("MRS marginals") {
    MrsModel mrs({0.3, 0.3, 2.0});  // Beta(1,1) at the midpoint
    mrs.prepare({40, 2, 15});
    const auto same = marginals(mrs, {5, 5}, {5, 5}, {0, 1, 2});
    CHECK(same[0] == doctest::Approx(2.0 * lbeta(6, 6)));
    CHECK(same[1] == doctest::Approx(lbeta(11, 11)));
    CHECK(same[2] == doctest::Approx(lbeta(11, 11)));
    CHECK(same[1] > same[0]);
    const auto opposite = marginals(mrs, {10, 0}, {0, 10}, {0, 1, 2});
    CHECK(opposite[0] > opposite[1] + 5.0);
    const auto swapped = marginals(mrs, {0, 10}, {10, 0}, {0, 1, 2});
    for (int i = 0; i < 3; ++i) CHECK(swapped[i] == doctest::Approx(opposite[i]));
    CHECK(mrs.expected_theta(1, 0, {std::vector<std::uint32_t>{8, 2}, std::vector<std::uint32_t>{1, 4}}, {0, 1, 2}) ==
          mrs.expected_theta(1, 1, {std::vector<std::uint32_t>{8, 2}, std::vector<std::uint32_t>{1, 4}}, {0, 1, 2}));
    const auto xi = static_cast<const StateModel&>(mrs).transition(0);
    CHECK(mrs.initial() == std::vector<double>(xi.begin(), xi.begin() + 3));
}

TEST_CASE("unknown model kind") {
    ModelConfig cfg;
    cfg.kind = "gp";
    CHECK_THROWS(make_model(cfg));
}
