#include "countcast/rng.hpp"

#include <cmath>

namespace countcast::rng {

double Stream::next_gamma(double shape, double rate) {
    if (shape <= 0.0 || rate <= 0.0) return 0.0;
    if (shape < 1.0) {
        // Boost: G(a) = G(a+1) * U^(1/a). Underflows to 0 for tiny shapes,
        // which is the right limit for a Gamma collapsing onto 0.
        const double g = next_gamma(shape + 1.0, 1.0);
        const double u = next_double();
        return g * std::pow(u, 1.0 / shape) / rate;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = next_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

std::int64_t Stream::next_poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    if (mean < 30.0) {
        // Knuth-style inversion by sequential search on the CDF.
        const double l = std::exp(-mean);
        std::int64_t k = 0;
        double p = next_double();
        double pk = l;
        double cdf = l;
        while (p > cdf) {
            ++k;
            pk *= mean / static_cast<double>(k);
            cdf += pk;
            if (pk <= 0.0) break;  // tail exhausted within double precision
        }
        return k;
    }
    // Hormann (1993), transformed rejection with squeeze (PTRS).
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mean = std::log(mean);
    for (;;) {
        const double u = next_double() - 0.5;
        const double v = next_double();
        const double us = 0.5 - std::fabs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_mean - mean - std::lgamma(k + 1.0)) {
            return static_cast<std::int64_t>(kf);
        }
    }
}

}  // namespace countcast::rng
