#pragma once

// Reduced-precision arithmetic emulated in binary64.
//
// Values are stored as doubles that happen to be representable in the target
// format. Every arithmetic result is rounded ("chopped") back to the target
// format, so a sequence of chopped operations behaves like the same sequence
// executed on hardware that implements the format natively.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chopsolve/errors.hpp"
#include "chopsolve/sparse.hpp"

namespace chopsolve {

enum class Rounding { NearestTiesToEven };

/// Description of a binary floating-point format.
///
/// `significand_bits` counts the implicit leading bit (binary16 has 11).
/// The exponent range is IEEE-symmetric: the smallest normal exponent is
/// `1 - max_exponent`. With `passthrough` set, chopping is the identity and
/// arithmetic runs in plain binary64.
struct FloatFormat {
    std::string name;
    int significand_bits = 53;
    int max_exponent = 1023;
    bool supports_subnormals = true;
    Rounding rounding = Rounding::NearestTiesToEven;
    bool passthrough = true;

    int min_exponent() const noexcept { return 1 - max_exponent; }

    /// Largest finite value, (2 - 2^(1-t)) * 2^emax.
    double max_finite() const noexcept {
        return std::ldexp(2.0 - std::ldexp(1.0, 1 - significand_bits), max_exponent);
    }
    double min_normal() const noexcept { return std::ldexp(1.0, min_exponent()); }
    double min_subnormal() const noexcept {
        return std::ldexp(1.0, min_exponent() - (significand_bits - 1));
    }

    friend bool operator==(const FloatFormat&, const FloatFormat&) = default;
};

namespace formats {

inline FloatFormat fp16() { return {"fp16", 11, 15, true, Rounding::NearestTiesToEven, false}; }
inline FloatFormat bfloat16() { return {"bfloat16", 8, 127, true, Rounding::NearestTiesToEven, false}; }
inline FloatFormat fp32() { return {"fp32", 24, 127, true, Rounding::NearestTiesToEven, false}; }
inline FloatFormat fp64() { return {"fp64", 53, 1023, true, Rounding::NearestTiesToEven, true}; }

/// Custom format. Throws ConfigError when t < 2, e_max < 1, or the format
/// does not fit inside binary64.
inline FloatFormat custom(int significand_bits, int max_exponent, bool subnormals = true) {
    if (significand_bits < 2 || significand_bits > 53)
        throw ConfigError("significand_bits must lie in [2, 53], got " + std::to_string(significand_bits));
    if (max_exponent < 1 || max_exponent > 1023)
        throw ConfigError("max_exponent must lie in [1, 1023], got " + std::to_string(max_exponent));
    return {"t" + std::to_string(significand_bits) + "e" + std::to_string(max_exponent),
            significand_bits, max_exponent, subnormals, Rounding::NearestTiesToEven, false};
}

inline std::vector<FloatFormat> presets() { return {fp16(), bfloat16(), fp32(), fp64()}; }

/// Resolves "fp16", "bfloat16", "fp32" or "fp64".
inline FloatFormat by_name(std::string_view name) {
    for (auto& f : presets())
        if (f.name == name) return f;
    throw ConfigError("unknown float format '" + std::string(name) + "'");
}

}  // namespace formats

/// Summation blocking used by every chopped reduction.
struct BlockedReduceConfig {
    std::size_t block_size = 256;
};

inline void validate(const BlockedReduceConfig& cfg) {
    if (cfg.block_size < 1) throw ConfigError("block_size must be >= 1");
}

// ---------------------------------------------------------------------------
// Instrumentation

enum class KernelKind { Dot, Spmv, Elementwise, Scalar };

inline const char* to_string(KernelKind k) {
    switch (k) {
        case KernelKind::Dot: return "dot";
        case KernelKind::Spmv: return "spmv";
        case KernelKind::Elementwise: return "elementwise";
        case KernelKind::Scalar: return "scalar";
    }
    return "?";
}

/// Per-thread call counters for the chopped kernels. An "overflow" is a call
/// that produced a non-finite value from finite operands.
struct OpCounters {
    std::uint64_t dot_calls = 0;
    std::uint64_t spmv_calls = 0;
    std::uint64_t ew_calls = 0;
    std::uint64_t scalar_calls = 0;
    std::uint64_t dot_overflows = 0;
    std::uint64_t spmv_overflows = 0;
    std::uint64_t ew_overflows = 0;
    std::uint64_t scalar_overflows = 0;
    std::optional<KernelKind> first_overflow;
};

inline OpCounters& op_counters() noexcept {
    thread_local OpCounters counters;
    return counters;
}

inline void reset_op_counters() noexcept { op_counters() = OpCounters{}; }

namespace detail {

inline bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

inline void note_overflow(KernelKind kind) noexcept {
    auto& c = op_counters();
    switch (kind) {
        case KernelKind::Dot: ++c.dot_overflows; break;
        case KernelKind::Spmv: ++c.spmv_overflows; break;
        case KernelKind::Elementwise: ++c.ew_overflows; break;
        case KernelKind::Scalar: ++c.scalar_overflows; break;
    }
    if (!c.first_overflow) c.first_overflow = kind;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scalar rounding

/// Rounds x to the nearest value representable in `fmt`, ties to even.
///
/// Overflow goes to +-inf, values below half the smallest subnormal go to a
/// signed zero, NaN and infinities pass through. Relies on the default
/// FE_TONEAREST floating-point environment.
inline double chop_scalar(double x, const FloatFormat& fmt) noexcept {
    if (fmt.passthrough || x == 0.0 || !std::isfinite(x)) return x;

    int e2 = 0;
    std::frexp(x, &e2);
    int exponent = e2 - 1;  // |x| in [2^exponent, 2^(exponent+1))
    const int emin = fmt.min_exponent();
    if (fmt.supports_subnormals && exponent < emin) exponent = emin;

    const double quantum = std::ldexp(1.0, exponent - (fmt.significand_bits - 1));
    double r = std::nearbyint(x / quantum) * quantum;

    if (std::fabs(r) > fmt.max_finite()) return std::copysign(std::numeric_limits<double>::infinity(), x);
    if (!fmt.supports_subnormals && std::fabs(r) < fmt.min_normal()) return std::copysign(0.0, x);
    return r;
}

inline std::vector<double> chop_vector(std::span<const double> x, const FloatFormat& fmt) {
    std::vector<double> out(x.begin(), x.end());
    if (!fmt.passthrough)
        for (auto& v : out) v = chop_scalar(v, fmt);
    return out;
}

/// Unit roundoff 2^(1-t) (the machine-epsilon convention).
inline double unit_roundoff(const FloatFormat& fmt) noexcept {
    return std::ldexp(1.0, 1 - fmt.significand_bits);
}

/// gamma_n = n u / (1 - n u). Throws BoundUndefinedError when n u >= 1.
inline double gamma_bound(std::size_t n, double u) {
    const double nu = static_cast<double>(n) * u;
    if (nu >= 1.0)
        throw BoundUndefinedError("gamma_n undefined: n*u = " + std::to_string(nu) + " >= 1");
    return nu / (1.0 - nu);
}

/// Arithmetic context carried through solvers and operators.
struct ChopContext {
    FloatFormat fmt = formats::fp64();
    BlockedReduceConfig reduce{};

    double chop(double x) const noexcept { return chop_scalar(x, fmt); }

    double add(double a, double b) const noexcept { return scalar(a + b, a, b); }
    double sub(double a, double b) const noexcept { return scalar(a - b, a, b); }
    double mul(double a, double b) const noexcept { return scalar(a * b, a, b); }
    double div(double a, double b) const noexcept { return scalar(a / b, a, b); }

private:
    double scalar(double exact, double a, double b) const noexcept {
        ++op_counters().scalar_calls;
        const double r = chop_scalar(exact, fmt);
        if (!std::isfinite(r) && std::isfinite(a) && std::isfinite(b)) detail::note_overflow(KernelKind::Scalar);
        return r;
    }
};

// ---------------------------------------------------------------------------
// Vector kernels

enum class EwOp { Add, Sub, Mul, Div };

/// out_i = chop(x_i (op) y_i): one rounding per element.
inline std::vector<double> chopped_ew(EwOp op, std::span<const double> x, std::span<const double> y,
                                      const FloatFormat& fmt) {
    if (x.size() != y.size())
        throw DimensionError("chopped_ew: length mismatch " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    ++op_counters().ew_calls;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = chop_scalar(x[i], fmt);
        const double b = chop_scalar(y[i], fmt);
        double r = 0.0;
        switch (op) {
            case EwOp::Add: r = a + b; break;
            case EwOp::Sub: r = a - b; break;
            case EwOp::Mul: r = a * b; break;
            case EwOp::Div: r = a / b; break;
        }
        out[i] = chop_scalar(r, fmt);
    }
    if (!detail::all_finite(out) && detail::all_finite(x) && detail::all_finite(y))
        detail::note_overflow(KernelKind::Elementwise);
    return out;
}

/// out_i = chop(alpha * x_i).
inline std::vector<double> chopped_scale(double alpha, std::span<const double> x, const FloatFormat& fmt) {
    ++op_counters().ew_calls;
    const double a = chop_scalar(alpha, fmt);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = chop_scalar(a * chop_scalar(x[i], fmt), fmt);
    if (!detail::all_finite(out) && std::isfinite(alpha) && detail::all_finite(x))
        detail::note_overflow(KernelKind::Elementwise);
    return out;
}

/// out_i = chop(y_i + chop(alpha * x_i)), the two-rounding axpy.
inline std::vector<double> chopped_axpy(double alpha, std::span<const double> x, std::span<const double> y,
                                        const FloatFormat& fmt) {
    auto ax = chopped_scale(alpha, x, fmt);
    return chopped_ew(EwOp::Add, y, ax, fmt);
}

namespace detail {

/// Two-level blocked sum of already-chopped addends: each block is summed
/// sequentially, then the block sums are accumulated sequentially. Every
/// addition is chopped.
template <class Terms>
double blocked_sum(const Terms& terms, std::size_t n, const FloatFormat& fmt, std::size_t block) {
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += block) {
        const std::size_t stop = std::min(n, start + block);
        double partial = terms(start);
        for (std::size_t i = start + 1; i < stop; ++i) partial = chop_scalar(partial + terms(i), fmt);
        total = start == 0 ? partial : chop_scalar(total + partial, fmt);
    }
    return total;
}

}  // namespace detail

/// Chopped inner product with blocked accumulation.
///
/// The elementwise products are rounded once (n roundings), then summed with
/// one rounding per addition. Returns 0 for empty input.
inline double chopped_dot(std::span<const double> x, std::span<const double> y, const FloatFormat& fmt,
                          const BlockedReduceConfig& cfg = {}) {
    if (x.size() != y.size())
        throw DimensionError("chopped_dot: length mismatch " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    validate(cfg);
    ++op_counters().dot_calls;
    const std::size_t n = x.size();
    if (n == 0) return 0.0;

    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = chop_scalar(chop_scalar(x[i], fmt) * chop_scalar(y[i], fmt), fmt);
    const double s = detail::blocked_sum([&](std::size_t i) { return z[i]; }, n, fmt, cfg.block_size);
    if (!std::isfinite(s) && detail::all_finite(x) && detail::all_finite(y)) detail::note_overflow(KernelKind::Dot);
    return s;
}

/// Chopped sparse matrix-vector product, y = A x (or A^T x).
///
/// Each output element is the blocked chopped reduction of the products
/// along one row (column for the transpose) in storage order. Inner-product
/// counters are not touched; spmv calls are counted separately.
inline std::vector<double> chopped_spmv(const SparseMatrix& a, std::span<const double> x, const FloatFormat& fmt,
                                        const BlockedReduceConfig& cfg = {}, bool transpose = false) {
    if (transpose) return chopped_spmv(a.transposed(), x, fmt, cfg, false);
    if (x.size() != a.cols())
        throw DimensionError("chopped_spmv: operand length " + std::to_string(x.size()) + " does not match " +
                             std::to_string(a.cols()) + " columns");
    validate(cfg);
    ++op_counters().spmv_calls;

    const auto off = a.row_offsets();
    const auto col = a.col_indices();
    const auto val = a.values();
    std::vector<double> xc = chop_vector(x, fmt);
    std::vector<double> y(a.rows(), 0.0);
    std::vector<double> z;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const std::size_t begin = off[i];
        const std::size_t len = off[i + 1] - begin;
        if (len == 0) continue;
        z.resize(len);
        for (std::size_t k = 0; k < len; ++k)
            z[k] = chop_scalar(chop_scalar(val[begin + k], fmt) * xc[col[begin + k]], fmt);
        y[i] = detail::blocked_sum([&](std::size_t k) { return z[k]; }, len, fmt, cfg.block_size);
    }
    if (!detail::all_finite(y) && detail::all_finite(x)) detail::note_overflow(KernelKind::Spmv);
    return y;
}

}  // namespace chopsolve
