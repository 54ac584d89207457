#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ipost {

// Seeded random stream. All mappings below are built directly on mt19937
// 32-bit words, so a given seed produces the same sequence on every
// platform (std::uniform_real_distribution makes no such guarantee).
class Rng {
public:
    explicit Rng(std::uint32_t seed) : gen_(seed) {}

    std::uint32_t next_u32() { return gen_(); }

    // uniform in [0, 1) with 24 bits of mantissa
    float uniform() { return static_cast<float>(gen_() >> 8) * (1.0f / 16777216.0f); }

    double uniform_double() {
        const std::uint64_t hi = gen_() >> 6;   // 26 bits
        const std::uint64_t lo = gen_() >> 5;   // 27 bits
        return static_cast<double>((hi << 27) | lo) * (1.0 / 9007199254740992.0);
    }

    float uniform_range(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint32_t uniform_int(std::uint32_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint32_t limit = 0xFFFFFFFFu - (0xFFFFFFFFu % n + 1) % n;
        std::uint32_t v = gen_();
        while (v > limit) v = gen_();
        return v % n;
    }

    double exponential(double mean) {
        double u = uniform_double();
        while (u <= 0.0) u = uniform_double();
        return -mean * std::log(u);
    }

    // Poisson by inversion; fine for the small means used here.
    int poisson(double mean) {
        const double limit = std::exp(-mean);
        double prod = 1.0;
        int count = -1;
        do {
            prod *= uniform_double();
            ++count;
        } while (prod > limit);
        return count;
    }

    bool bernoulli(double p) { return uniform_double() < p; }

private:
    std::mt19937 gen_;
};

}  // namespace ipost
