#pragma once

// Test-only reference conversion binary64 -> binary16 -> binary64, done with
// integer operations on the IEEE bit patterns. Independent of the scaling
// approach used by chop_scalar.

#include <bit>
#include <cmath>
#include <cstdint>

namespace chopsolve::test {

inline std::uint16_t double_to_half_bits(double d) {
    const auto b = std::bit_cast<std::uint64_t>(d);
    const auto sign = static_cast<std::uint16_t>((b >> 63) << 15);
    const auto biased = static_cast<int>((b >> 52) & 0x7ff);
    const std::uint64_t mant = b & ((std::uint64_t{1} << 52) - 1);

    if (biased == 0x7ff) return sign | 0x7c00 | (mant ? 0x200 : 0);
    if (biased == 0) return sign;  // binary64 subnormals are far below 2^-25

    const int e = biased - 1023;
    if (e > 15) return sign | 0x7c00;
    const std::uint64_t sig = mant | (std::uint64_t{1} << 52);

    const bool normal = e >= -14;
    const int shift = normal ? 42 : 42 + (-14 - e);
    if (shift >= 64) return sign;
    const std::uint64_t q0 = sig >> shift;
    const std::uint64_t rem = sig & ((std::uint64_t{1} << shift) - 1);
    const std::uint64_t halfway = std::uint64_t{1} << (shift - 1);
    std::uint64_t q = q0;
    if (rem > halfway || (rem == halfway && (q0 & 1))) ++q;

    std::uint64_t bits = normal ? (static_cast<std::uint64_t>(e + 15) << 10) + q - 1024 : q;
    if (bits >= 0x7c00) bits = 0x7c00;
    return sign | static_cast<std::uint16_t>(bits);
}

inline double half_bits_to_double(std::uint16_t h) {
    const double sign = (h & 0x8000) ? -1.0 : 1.0;
    const int exp = (h >> 10) & 0x1f;
    const int frac = h & 0x3ff;
    if (exp == 0x1f) return frac ? std::nan("") : sign * INFINITY;
    if (exp == 0) return sign * std::ldexp(frac, -24);
    return sign * std::ldexp(1024 + frac, exp - 25);
}

inline double reference_half_round(double d) { return half_bits_to_double(double_to_half_bits(d)); }

}  // namespace chopsolve::test
