#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace ptychodr {

// Deterministic random source. mt19937_64 output is pinned by the standard,
// but the std:: distributions are not, so the samplers here are hand-rolled
// to keep fixed-seed runs bit-reproducible across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on [lo, hi], inclusive, by rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit span
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return lo + static_cast<std::int64_t>(x % range);
    }

    // Standard normal via Box-Muller (two raws per call, no cached state).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Poisson draw: Knuth's product method for small means, Hormann's PTRS
    // transformed rejection for large ones.
    std::int64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            std::int64_t k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= uniform();
            } while (p > limit);
            return k - 1;
        }
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform();
            const double us = 0.5 - std::abs(u);
            const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
            if (us >= 0.07 && v <= v_r) return k;
            if (k < 0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                static_cast<double>(k) * log_mean - mean - std::lgamma(static_cast<double>(k) + 1.0)) {
                return k;
            }
        }
    }

private:
    std::mt19937_64 engine_;
};

// Stable child seed for a named pipeline stage, so one experiment seed
// fans out deterministically to every stochastic component.
inline std::uint64_t child_seed(std::uint64_t seed, const std::string& tag) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ull;
    }
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

}  // namespace ptychodr
