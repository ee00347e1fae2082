#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace hmpt {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Thread-safe log-gamma (no write to the global signgam).
double log_gamma(double x);

/// log B(a, b) for a, b > 0.
double log_beta(double a, double b);

double log_add_exp(double a, double b);

/// Max-shifted log(sum(exp(values))); returns -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

/// Normalizes log-weights in place into linear probabilities; returns the log normalizer.
double normalize_log_weights(std::span<const double> log_w, std::span<double> out);

/// log Gamma(a + n) - log Gamma(a), tabulated for n below a cap.
class LogRisingFactorial {
public:
    LogRisingFactorial() = default;
    LogRisingFactorial(double a, std::size_t cap);

    double operator()(std::uint32_t n) const {
        if (n < table_.size()) return table_[n];
        return log_gamma(a_ + n) - log_gamma_a_;
    }
    double base() const { return a_; }

private:
    double a_ = 1.0;
    double log_gamma_a_ = 0.0;
    std::vector<double> table_;
};

/// Counter-based stream: SplitMix64 over a 64-bit key. Each (seed, step, slot)
/// triple names an independent stream, so results do not depend on the order
/// in which particles are processed.
class StreamRng {
public:
    using result_type = std::uint64_t;

    explicit StreamRng(std::uint64_t key) : state_(key) {}
    StreamRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

/// Draws an index from unnormalized log-weights by inversion.
std::size_t sample_log_categorical(std::span<const double> log_w, StreamRng& rng);

/// log of a Gamma(shape, 1) draw; stays finite for very small shapes.
double sample_log_gamma(double shape, StreamRng& rng);

double sample_beta(double a, double b, StreamRng& rng);

/// logit of a Beta(a, b) draw, computed as a difference of log-gamma draws.
double sample_beta_logit(double a, double b, StreamRng& rng);

} // namespace hmpt
