#pragma once

// CGLS and the Chebyshev semi-iterative method with every arithmetic step
// chopped to a target format. Diagnostics (error and residual norms) are
// evaluated in working precision and never feed back into the iteration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chopsolve/errors.hpp"
#include "chopsolve/linops.hpp"
#include "chopsolve/precision.hpp"

namespace chopsolve {

enum class Termination { Tolerance, MaxIter, NonFinite };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::Tolerance: return "Tolerance";
        case Termination::MaxIter: return "MaxIter";
        case Termination::NonFinite: return "NonFinite";
    }
    return "?";
}

struct SolverConfig {
    FloatFormat fmt = formats::fp64();
    BlockedReduceConfig reduce{};
    int max_iter = 100;
    /// CGLS stops once psi_k <= tol; Chebyshev uses it as epsilon in the
    /// iteration-count formula when no explicit eps is given.
    double tol = 0.0;
    /// Informational: regularization enters through the operator, see
    /// tikhonov_augment.
    double lambda = 0.0;
    std::optional<std::vector<double>> track_error_against;

    ChopContext context() const { return {fmt, reduce}; }
};

struct IterationRecord {
    std::size_t k = 0;
    std::optional<double> rel_error;
    double residual_norm = 0.0;
    bool finite = true;
};

struct SolveResult {
    std::vector<double> x_final;
    std::vector<double> x_best;
    std::size_t best_iter = 0;
    std::vector<IterationRecord> history;
    Termination termination = Termination::MaxIter;
    /// Set when an iterate, or the returned x, is exactly zero although b != 0
    /// (the silent-underflow failure of badly rescaled problems).
    bool x_underflow_to_zero = false;
    /// Kernel counters accumulated during this solve only.
    OpCounters counters;
};

namespace detail {

/// Isolates the thread-local counters for the duration of one solve and
/// folds them back into the caller's totals afterwards.
class CounterScope {
public:
    CounterScope() : saved_(op_counters()) { reset_op_counters(); }
    CounterScope(const CounterScope&) = delete;
    CounterScope& operator=(const CounterScope&) = delete;
    ~CounterScope() {
        auto& c = op_counters();
        c.dot_calls += saved_.dot_calls;
        c.spmv_calls += saved_.spmv_calls;
        c.ew_calls += saved_.ew_calls;
        c.scalar_calls += saved_.scalar_calls;
        c.dot_overflows += saved_.dot_overflows;
        c.spmv_overflows += saved_.spmv_overflows;
        c.ew_overflows += saved_.ew_overflows;
        c.scalar_overflows += saved_.scalar_overflows;
        if (saved_.first_overflow) c.first_overflow = saved_.first_overflow;
    }
    OpCounters current() const { return op_counters(); }

private:
    OpCounters saved_;
};

inline bool finite(std::span<const double> v) { return all_finite(v); }

inline bool all_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return a == 0.0; });
}

inline double wp_norm(std::span<const double> v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
}

/// Working-precision bookkeeping shared by both solvers.
class History {
public:
    History(const LinearOperator& op, std::span<const double> b, const SolverConfig& cfg, SolveResult& out)
        : op_(op), b_(b), cfg_(cfg), out_(out) {
        if (cfg.track_error_against) {
            if (cfg.track_error_against->size() != op.cols())
                throw DimensionError("track_error_against length does not match operator columns");
            x_true_norm_ = wp_norm(*cfg.track_error_against);
        }
    }

    /// Records iterate k. Returns false if x is non-finite.
    bool record(std::size_t k, const std::vector<double>& x) {
        IterationRecord rec;
        rec.k = k;
        rec.finite = finite(x);
        if (rec.finite) {
            const auto ax = op_.apply(x, working_precision());
            double s = 0.0;
            for (std::size_t i = 0; i < ax.size(); ++i) s += (b_[i] - ax[i]) * (b_[i] - ax[i]);
            rec.residual_norm = std::sqrt(s);
            if (cfg_.track_error_against) {
                const auto& xt = *cfg_.track_error_against;
                double e = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) e += (x[i] - xt[i]) * (x[i] - xt[i]);
                rec.rel_error = x_true_norm_ > 0.0 ? std::sqrt(e) / x_true_norm_ : std::sqrt(e);
            }
            const double score = rec.rel_error ? *rec.rel_error : rec.residual_norm;
            if (out_.history.empty() || score < best_score_) {
                best_score_ = score;
                out_.best_iter = k;
                out_.x_best = x;
            }
            out_.x_final = x;
        } else {
            rec.residual_norm = std::numeric_limits<double>::quiet_NaN();
            if (cfg_.track_error_against) rec.rel_error = std::numeric_limits<double>::quiet_NaN();
        }
        out_.history.push_back(rec);
        return rec.finite;
    }

private:
    const LinearOperator& op_;
    std::span<const double> b_;
    const SolverConfig& cfg_;
    SolveResult& out_;
    double x_true_norm_ = 0.0;
    double best_score_ = std::numeric_limits<double>::infinity();
};

inline void check_config(const LinearOperator& op, std::span<const double> b, const SolverConfig& cfg) {
    if (b.size() != op.rows())
        throw DimensionError("rhs length " + std::to_string(b.size()) + " does not match operator rows " +
                             std::to_string(op.rows()));
    if (cfg.max_iter < 1) throw ConfigError("max_iter must be >= 1");
    validate(cfg.reduce);
}

}  // namespace detail

/// Conjugate gradients on the normal equations A^T A x = A^T b, x0 = 0.
///
/// Stops when psi_k = |A^T r_k|^2 <= cfg.tol, after cfg.max_iter updates, or
/// at the first non-finite value among psi, alpha, beta, q and x. On a
/// non-finite stop x_final is the last finite iterate.
inline SolveResult cgls(const LinearOperator& op, std::span<const double> b, const SolverConfig& cfg) {
    detail::check_config(op, b, cfg);
    detail::CounterScope counters;
    const ChopContext ctx = cfg.context();
    const auto& fmt = ctx.fmt;

    SolveResult out;
    detail::History history(op, b, cfg, out);

    std::vector<double> x(op.cols(), 0.0);
    std::vector<double> r = chop_vector(b, fmt);
    const bool b_nonzero = !detail::all_zero(r);
    std::vector<double> s = op.apply_transpose(r, ctx);
    std::vector<double> p = s;
    double psi = chopped_dot(s, s, fmt, ctx.reduce);
    history.record(0, x);

    auto finish = [&](Termination t) {
        out.termination = t;
        if (t != Termination::NonFinite && b_nonzero && detail::all_zero(x))
            out.x_underflow_to_zero = true;
        out.counters = counters.current();
        return out;
    };
    if (!std::isfinite(psi)) return finish(Termination::NonFinite);

    for (int k = 0;; ++k) {
        if (psi <= cfg.tol) return finish(Termination::Tolerance);
        if (k == cfg.max_iter) return finish(Termination::MaxIter);

        const auto q = op.apply(p, ctx);
        if (!detail::finite(q)) return finish(Termination::NonFinite);
        const double qq = chopped_dot(q, q, fmt, ctx.reduce);
        const double alpha = ctx.div(psi, qq);
        if (!std::isfinite(alpha)) return finish(Termination::NonFinite);

        x = chopped_axpy(alpha, p, x, fmt);
        if (!history.record(static_cast<std::size_t>(k) + 1, x)) return finish(Termination::NonFinite);
        if (b_nonzero && detail::all_zero(x)) out.x_underflow_to_zero = true;

        r = chopped_axpy(-alpha, q, r, fmt);
        s = op.apply_transpose(r, ctx);
        const double psi_next = chopped_dot(s, s, fmt, ctx.reduce);
        if (!std::isfinite(psi_next)) return finish(Termination::NonFinite);
        const double beta = ctx.div(psi_next, psi);
        if (!std::isfinite(beta)) return finish(Termination::NonFinite);
        p = chopped_axpy(beta, p, s, fmt);
        psi = psi_next;
    }
}

// ---------------------------------------------------------------------------
// Chebyshev semi-iteration

struct ChebyshevCoefficients {
    double alpha = 0.0;
    double beta = 0.0;
};

/// Step coefficients of the Chebyshev semi-iteration for least squares, with
/// d = (sigma_U^2 + sigma_L^2)/2 and c = (sigma_U^2 - sigma_L^2)/2:
///
///   k = 0:  alpha = 1/d,                     beta = 0
///   k = 1:  alpha = 1/(d - c^2/(2d)),        beta = (c/d)^2 / 2
///   k >= 2: alpha = 1/(d - alpha_prev c^2/4), beta = (alpha_prev c/2)^2
///
/// Every scalar operation is chopped to `fmt`. Throws CoefficientError when a
/// denominator is not positive.
inline ChebyshevCoefficients cs_coefficients(std::size_t k, double c, double d, std::optional<double> alpha_prev,
                                             const FloatFormat& fmt = formats::fp64()) {
    if (!(d > 0.0)) throw CoefficientError("Chebyshev coefficients need d > 0");
    const ChopContext ctx{fmt, {}};
    auto invert = [&](double den) {
        if (!(den > 0.0)) throw CoefficientError("Chebyshev alpha denominator is not positive; spectral bounds invalid");
        return ctx.div(1.0, den);
    };
    if (k == 0) return {invert(d), 0.0};
    const double c2 = ctx.mul(c, c);
    if (k == 1) {
        const double ratio = ctx.div(c, d);
        return {invert(ctx.sub(d, ctx.div(c2, ctx.mul(2.0, d)))), ctx.mul(0.5, ctx.mul(ratio, ratio))};
    }
    if (!alpha_prev) throw ConfigError("cs_coefficients: alpha_prev is required for k >= 2");
    const double half_ac = ctx.div(ctx.mul(*alpha_prev, c), 2.0);
    return {invert(ctx.sub(d, ctx.div(ctx.mul(*alpha_prev, c2), 4.0))), ctx.mul(half_ac, half_ac)};
}

inline constexpr std::size_t kChebyshevMaxCount = 1'000'000;

struct IterationCount {
    std::size_t count = 0;
    bool clamped = false;
};

/// K = ceil((log eps - log 2) / log((sigma_U - sigma_L)/(sigma_U + sigma_L))),
/// clamped to [1, 10^6]. The loop runs k = 0..K.
inline IterationCount cs_iteration_count(double sigma_l, double sigma_u, double eps) {
    if (!(sigma_l > 0.0 && sigma_l < sigma_u) || !std::isfinite(sigma_u))
        throw InvalidBoundError("Chebyshev bounds need 0 < sigma_L < sigma_U");
    if (!(eps > 0.0 && eps < 2.0)) throw ConfigError("Chebyshev eps must lie in (0, 2)");
    const double ratio = (sigma_u - sigma_l) / (sigma_u + sigma_l);
    const double raw = (std::log(eps) - std::log(2.0)) / std::log(ratio);
    if (!std::isfinite(raw))
        throw CountOverflowError("Chebyshev iteration count is not finite (sigma_L too small relative to sigma_U)");
    const double k = std::ceil(raw);
    if (k < 1.0) return {1, true};
    if (k > static_cast<double>(kChebyshevMaxCount)) return {kChebyshevMaxCount, true};
    return {static_cast<std::size_t>(k), false};
}

/// Chebyshev semi-iterative least-squares solve, x0 = 0.
///
/// Runs k = 0..K with K from cs_iteration_count, truncated to cfg.max_iter
/// steps. Uses no inner products. Termination is Tolerance when the full
/// K + 1 steps complete, MaxIter when truncated.
inline SolveResult chebyshev_si(const LinearOperator& op, std::span<const double> b, double sigma_l, double sigma_u,
                                double eps, const SolverConfig& cfg) {
    detail::check_config(op, b, cfg);
    const auto count = cs_iteration_count(sigma_l, sigma_u, eps);
    detail::CounterScope counters;
    const ChopContext ctx = cfg.context();
    const auto& fmt = ctx.fmt;

    const double su2 = ctx.mul(sigma_u, sigma_u);
    const double sl2 = ctx.mul(sigma_l, sigma_l);
    const double d = ctx.div(ctx.add(su2, sl2), 2.0);
    const double c = ctx.div(ctx.sub(su2, sl2), 2.0);

    SolveResult out;
    detail::History history(op, b, cfg, out);
    std::vector<double> x(op.cols(), 0.0);
    std::vector<double> v(op.cols(), 0.0);
    std::vector<double> r = chop_vector(b, fmt);
    const bool b_nonzero = !detail::all_zero(r);
    history.record(0, x);

    auto finish = [&](Termination t) {
        out.termination = t;
        if (t != Termination::NonFinite && b_nonzero && detail::all_zero(x))
            out.x_underflow_to_zero = true;
        out.counters = counters.current();
        return out;
    };
    if (!std::isfinite(d) || !std::isfinite(c)) return finish(Termination::NonFinite);

    const std::size_t steps = count.count + 1;
    std::optional<double> alpha_prev;
    for (std::size_t k = 0; k < steps; ++k) {
        if (k == static_cast<std::size_t>(cfg.max_iter)) return finish(Termination::MaxIter);

        const auto coef = cs_coefficients(k, c, d, alpha_prev, fmt);
        if (!std::isfinite(coef.alpha) || !std::isfinite(coef.beta)) return finish(Termination::NonFinite);
        alpha_prev = coef.alpha;

        const auto s = op.apply_transpose(r, ctx);
        v = chopped_axpy(coef.beta, v, s, fmt);
        x = chopped_axpy(coef.alpha, v, x, fmt);
        if (!history.record(k + 1, x)) return finish(Termination::NonFinite);
        if (b_nonzero && detail::all_zero(x)) out.x_underflow_to_zero = true;
        const auto av = op.apply(v, ctx);
        r = chopped_axpy(-coef.alpha, av, r, fmt);
        if (!detail::finite(v) || !detail::finite(r)) return finish(Termination::NonFinite);
    }
    return finish(Termination::Tolerance);
}

}  // namespace chopsolve
