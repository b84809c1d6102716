#pragma once

// Operator abstraction over sparse matrices, Tikhonov augmentation, spectral
// bound estimation and a dense direct Tikhonov solve used as a test oracle.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chopsolve/errors.hpp"
#include "chopsolve/precision.hpp"
#include "chopsolve/sparse.hpp"

namespace chopsolve {

/// Working-precision context: passthrough format, default blocking.
inline ChopContext working_precision() { return ChopContext{formats::fp64(), {}}; }

/// A linear map R^cols -> R^rows together with its transpose, evaluated under
/// a given arithmetic context.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;

    virtual std::size_t rows() const = 0;
    virtual std::size_t cols() const = 0;

    virtual std::vector<double> apply(std::span<const double> x, const ChopContext& ctx) const = 0;
    virtual std::vector<double> apply_transpose(std::span<const double> y, const ChopContext& ctx) const = 0;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

/// Plain sparse operator. Keeps a transposed copy so A^T products reduce along
/// contiguous storage.
class SparseOperator final : public LinearOperator {
public:
    explicit SparseOperator(SparseMatrix a) : a_(std::move(a)), at_(a_.transposed()) {}

    std::size_t rows() const override { return a_.rows(); }
    std::size_t cols() const override { return a_.cols(); }

    std::vector<double> apply(std::span<const double> x, const ChopContext& ctx) const override {
        return chopped_spmv(a_, x, ctx.fmt, ctx.reduce, false);
    }
    std::vector<double> apply_transpose(std::span<const double> y, const ChopContext& ctx) const override {
        return chopped_spmv(at_, y, ctx.fmt, ctx.reduce, false);
    }

    const SparseMatrix& matrix() const noexcept { return a_; }

private:
    SparseMatrix a_;
    SparseMatrix at_;
};

inline OperatorPtr make_operator(SparseMatrix a) { return std::make_shared<SparseOperator>(std::move(a)); }

/// The stacked operator [A; lambda I] of the Tikhonov least-squares form.
class TikhonovOperator final : public LinearOperator {
public:
    TikhonovOperator(OperatorPtr inner, double lambda) : inner_(std::move(inner)), lambda_(lambda) {
        if (!inner_) throw ConfigError("TikhonovOperator: null inner operator");
        if (!(lambda_ >= 0.0)) throw InvalidBoundError("Tikhonov lambda must be >= 0");
    }

    std::size_t rows() const override { return inner_->rows() + inner_->cols(); }
    std::size_t cols() const override { return inner_->cols(); }

    std::vector<double> apply(std::span<const double> x, const ChopContext& ctx) const override {
        if (x.size() != cols()) throw DimensionError("TikhonovOperator::apply: length mismatch");
        auto top = inner_->apply(x, ctx);
        auto bottom = chopped_scale(lambda_, x, ctx.fmt);
        top.insert(top.end(), bottom.begin(), bottom.end());
        return top;
    }

    std::vector<double> apply_transpose(std::span<const double> y, const ChopContext& ctx) const override {
        if (y.size() != rows()) throw DimensionError("TikhonovOperator::apply_transpose: length mismatch");
        const auto m = inner_->rows();
        auto head = inner_->apply_transpose(y.first(m), ctx);
        auto tail = chopped_scale(lambda_, y.subspan(m), ctx.fmt);
        return chopped_ew(EwOp::Add, head, tail, ctx.fmt);
    }

    const LinearOperator& inner() const noexcept { return *inner_; }
    double lambda() const noexcept { return lambda_; }

private:
    OperatorPtr inner_;
    double lambda_;
};

inline std::shared_ptr<const TikhonovOperator> tikhonov_augment(OperatorPtr a, double lambda) {
    return std::make_shared<TikhonovOperator>(std::move(a), lambda);
}

/// Right-hand side [b; 0] matching an operator augmented over `n_cols` unknowns.
inline std::vector<double> tikhonov_rhs(std::span<const double> b, std::size_t n_cols) {
    std::vector<double> out(b.begin(), b.end());
    out.resize(b.size() + n_cols, 0.0);
    return out;
}

// ---------------------------------------------------------------------------

struct SigmaBounds {
    double lower = 0.0;
    double upper = 0.0;
};

inline constexpr double kSigmaUpperSafety = 0.05;

/// Bounds on the singular values of [A; lambda I].
///
/// The upper bound inflates a power-method estimate of lambda_max(A^T A),
/// computed in working precision from a seeded Gaussian start, by 5%. The
/// lower bound is lambda itself.
inline SigmaBounds estimate_sigma_bounds(const LinearOperator& a, double lambda, int power_iters,
                                         std::uint64_t seed) {
    if (!(lambda > 0.0)) throw InvalidBoundError("sigma bounds need lambda > 0 (lower bound is lambda)");
    if (power_iters < 1) throw ConfigError("power_iters must be >= 1");

    const auto ctx = working_precision();
    const std::size_t n = a.cols();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<double> v(n);
    for (auto& x : v) x = gauss(rng);

    auto normalize = [](std::vector<double>& w) {
        double s = 0.0;
        for (double x : w) s += x * x;
        s = std::sqrt(s);
        if (s > 0.0)
            for (auto& x : w) x /= s;
        return s;
    };
    normalize(v);

    double rho = 0.0;
    for (int it = 0; it < power_iters; ++it) {
        const auto av = a.apply(v, ctx);
        double rq = 0.0;  // Rayleigh quotient v^T A^T A v with |v| = 1
        for (double x : av) rq += x * x;
        rho = rq;
        auto w = a.apply_transpose(av, ctx);
        if (normalize(w) == 0.0) break;
        v = std::move(w);
    }
    return {lambda, std::sqrt(rho + lambda * lambda) * (1.0 + kSigmaUpperSafety)};
}

/// Tikhonov filter factor sigma^2 / (sigma^2 + lambda^2).
inline double filter_factor(double sigma, double lambda) noexcept {
    const double s2 = sigma * sigma;
    return s2 / (s2 + lambda * lambda);
}

inline constexpr std::size_t kDirectSolveMaxCols = 4096;

/// x = (A^T A + lambda^2 I)^{-1} A^T b by dense Cholesky on the normal
/// equations. Intended for small reference problems only.
inline std::vector<double> direct_tikhonov_solve(const SparseMatrix& a, std::span<const double> b, double lambda) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (b.size() != m) throw DimensionError("direct_tikhonov_solve: rhs length mismatch");
    if (n > kDirectSolveMaxCols)
        throw DimensionError("direct_tikhonov_solve: " + std::to_string(n) + " columns exceeds dense limit");

    std::vector<double> g(n * n, 0.0);  // A^T A + lambda^2 I, row-major
    std::vector<double> rhs(n, 0.0);
    const auto off = a.row_offsets();
    const auto col = a.col_indices();
    const auto val = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = off[i]; p < off[i + 1]; ++p) {
            rhs[col[p]] += val[p] * b[i];
            for (std::size_t q = off[i]; q < off[i + 1]; ++q) g[col[p] * n + col[q]] += val[p] * val[q];
        }
    double max_diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        g[j * n + j] += lambda * lambda;
        max_diag = std::max(max_diag, g[j * n + j]);
    }

    // In-place lower Cholesky factor.
    const double tiny = static_cast<double>(n) * 1e-15 * max_diag;
    for (std::size_t j = 0; j < n; ++j) {
        double d = g[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= g[j * n + k] * g[j * n + k];
        if (!(d > tiny)) throw SingularSystemError("direct_tikhonov_solve: normal matrix is singular");
        const double ljj = std::sqrt(d);
        g[j * n + j] = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = g[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= g[i * n + k] * g[j * n + k];
            g[i * n + j] = s / ljj;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= g[i * n + k] * rhs[k];
        rhs[i] = s / g[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= g[k * n + i] * rhs[k];
        rhs[i] = s / g[i * n + i];
    }
    return rhs;
}

}  // namespace chopsolve
