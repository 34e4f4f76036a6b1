#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "memcol/errors.hpp"

namespace memcol {

// Deterministic sampling helpers over std::mt19937_64. The standard library
// distributions are avoided on purpose: their output sequences differ between
// library implementations, and identical seeds must produce identical
// artifacts everywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Unbiased integer in [0, bound), rejection-sampled.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw ConfigError("Rng::below: bound must be positive");
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = gen_();
            if (r >= threshold) return r % bound;
        }
    }

    // Integer in [lo, hi], inclusive.
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw ConfigError("Rng::range: empty interval");
        const std::uint64_t span =
            static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + below(span));
    }

    // Double in [0, 1) with 53 random bits.
    double real() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

    bool bernoulli(double p) { return real() < p; }

    // Standard normal via Box-Muller; the paired variate is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = real();
        } while (u1 <= 0.0);
        const double u2 = real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Index drawn proportionally to the (non-negative) weights.
    std::size_t weighted(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ConfigError("Rng::weighted: negative weight");
            total += w;
        }
        if (total <= 0.0) throw ConfigError("Rng::weighted: weights sum to zero");
        double x = real() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            x -= weights[i];
            if (x < 0.0) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace memcol
