#pragma once

#include <cmath>
#include <cstdint>

namespace countcast::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Hash a master seed with up to three stream coordinates. Distinct coordinates
// yield statistically independent streams, which keeps per-cell sampling
// reproducible regardless of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t s = master;
    s = mix64(s + 0x9E3779B97F4A7C15ull + a);
    s = mix64(s + 0x3C6EF372FE94F82Aull + b);
    s = mix64(s + 0x61C8864680B583EBull + c);
    return s;
}

// SplitMix64 stream. Deliberately self-contained so draw sequences are
// bit-identical across standard-library implementations.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix64(state_);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Gamma(shape, rate), Marsaglia-Tsang squeeze with the shape<1 boost.
    double next_gamma(double shape, double rate);

    // Poisson(mean); inversion for small means, Hormann's PTRS otherwise.
    std::int64_t next_poisson(double mean);

private:
    std::uint64_t state_;
};

}  // namespace countcast::rng
