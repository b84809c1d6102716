#pragma once

// Seeded sample generators shared by the unit and acceptance suites.

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace chopsolve::test {

/// Working-precision values stressing binary16 rounding: a quarter each of
/// random normals/overflow (exponents -16..17), subnormal-range values, exact
/// ties between neighbouring half values, and half values nudged by one
/// binary64 ulp.
inline std::vector<double> half_stress_samples(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> exp_wide(-16, 17);
    std::uniform_int_distribution<int> exp_sub(-28, -14);
    std::uniform_real_distribution<double> mant(1.0, 2.0);
    std::uniform_int_distribution<int> half_bits(0, 0x7bfe);
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double sign = (rng() & 1) ? -1.0 : 1.0;
        switch (i % 4) {
            case 0: out.push_back(sign * std::ldexp(mant(rng), exp_wide(rng))); break;
            case 1: out.push_back(sign * std::ldexp(mant(rng), exp_sub(rng))); break;
            case 2: {
                // Midpoint of two consecutive half values (exact in binary64).
                const int h = half_bits(rng);
                const int exp = (h >> 10) & 0x1f;
                const double ulp = std::ldexp(1.0, (exp == 0 ? 1 : exp) - 25);
                const int frac = h & 0x3ff;
                const double v = exp == 0 ? std::ldexp(frac, -24) : std::ldexp(1024 + frac, exp - 25);
                out.push_back(sign * (v + ulp / 2));
                break;
            }
            default: {
                const int h = half_bits(rng);
                const int exp = (h >> 10) & 0x1f;
                const int frac = h & 0x3ff;
                const double v = exp == 0 ? std::ldexp(frac, -24) : std::ldexp(1024 + frac, exp - 25);
                const double ulp = std::ldexp(1.0, (exp == 0 ? 1 : exp) - 25);
                const double mid = v + ulp / 2;
                out.push_back(sign * ((rng() & 1) ? std::nextafter(mid, 0.0) : std::nextafter(mid, INFINITY)));
                break;
            }
        }
    }
    return out;
}

}  // namespace chopsolve::test
