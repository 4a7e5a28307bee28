#pragma once

#include <cmath>
#include <cstdint>

namespace lsi {

// splitmix64 finalizer; the basis for all randomness in the project.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Counter-based generator: output i of stream (seed, tag) is a pure function
// of its key, so draws are reproducible independent of evaluation order.
struct StatelessRng {
    uint64_t seed = 0;
    uint64_t tag = 0;

    uint64_t bits(uint64_t counter) const {
        return mix64(mix64(mix64(seed) ^ tag) ^ counter);
    }

    // uniform in [0, 1)
    double uniform(uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // unbiased integer in [0, bound) via 128-bit multiply-shift with rejection
    uint64_t below(uint64_t counter, uint64_t bound) const {
        uint64_t x = bits(counter);
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            uint64_t threshold = -bound % bound;
            uint64_t salt = 1;
            while (lo < threshold) {
                x = bits(counter + (salt++ << 32));
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }
};

// Sequential stream for weight init and shuffling.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(mix64(seed ^ 0x5851f42d4c957f2dull)) {}

    uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix64(state_);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Box-Muller, one value per call (spare discarded for simplicity)
    double gaussian(double mean, double stddev) {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    uint64_t below(uint64_t bound) {
        __uint128_t m = static_cast<__uint128_t>(next()) * bound;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            uint64_t threshold = -bound % bound;
            while (lo < threshold) {
                m = static_cast<__uint128_t>(next()) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

  private:
    uint64_t state_;
};

} // namespace lsi
