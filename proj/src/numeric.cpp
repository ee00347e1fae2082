#include "hmpt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hmpt {

double log_gamma(double x) {
    int sign = 0;
    return ::lgamma_r(x, &sign);
}

double log_beta(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

double log_sum_exp(std::span<const double> values) {
    double hi = kNegInf;
    for (double v : values) hi = std::max(hi, v);
    if (hi == kNegInf) return kNegInf;
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - hi);
    return hi + std::log(acc);
}

double normalize_log_weights(std::span<const double> log_w, std::span<double> out) {
    const double z = log_sum_exp(log_w);
    if (!std::isfinite(z)) throw std::domain_error("cannot normalize weights: all zero or non-finite");
    for (std::size_t i = 0; i < log_w.size(); ++i) out[i] = std::exp(log_w[i] - z);
    return z;
}

LogRisingFactorial::LogRisingFactorial(double a, std::size_t cap)
    : a_(a), log_gamma_a_(log_gamma(a)), table_(cap + 1) {
    for (std::size_t n = 0; n <= cap; ++n) table_[n] = log_gamma(a + static_cast<double>(n)) - log_gamma_a_;
    table_[0] = 0.0;
}

std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
    : state_(mix64(mix64(mix64(seed + 0x632BE59BD9B4E019ULL) ^ (a + 0x9E3779B97F4A7C15ULL)) ^
                   (b + 0xD1B54A32D192ED03ULL))) {}

std::size_t sample_log_categorical(std::span<const double> log_w, StreamRng& rng) {
    if (log_w.empty()) throw std::invalid_argument("sample_log_categorical: empty weights");
    double hi = kNegInf;
    for (double v : log_w) hi = std::max(hi, v);
    if (!std::isfinite(hi)) throw std::domain_error("sample_log_categorical: no finite weight");
    double total = 0.0;
    for (double v : log_w) total += std::exp(v - hi);
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < log_w.size(); ++i) {
        if (log_w[i] == kNegInf) continue;
        acc += std::exp(log_w[i] - hi);
        last = i;
        if (u < acc) return i;
    }
    return last;
}

double sample_log_gamma(double shape, StreamRng& rng) {
    if (shape >= 1.0) {
        std::gamma_distribution<double> g(shape, 1.0);
        return std::log(g(rng));
    }
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    const double x = g(rng);
    double u = rng.uniform();
    while (u == 0.0) u = rng.uniform();
    return std::log(x) + std::log(u) / shape;
}

double sample_beta_logit(double a, double b, StreamRng& rng) {
    const double lx = sample_log_gamma(a, rng);
    const double ly = sample_log_gamma(b, rng);
    return lx - ly;
}

double sample_beta(double a, double b, StreamRng& rng) {
    const double t = sample_beta_logit(a, b, rng);
    return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

} // namespace hmpt
