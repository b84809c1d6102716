#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "chopsolve/linops.hpp"
#include "support/dense_oracle.hpp"

using namespace chopsolve;

namespace {

SparseMatrix random_sparse(std::size_t m, std::size_t n, double density, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(density);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (keep(rng)) t.push_back({i, j, u(rng)});
    return SparseMatrix::from_triplets(m, n, std::move(t));
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(d) / norm(b);
}

const ChopContext kWp = working_precision();

}  // namespace

TEST(SparseMatrix, RejectsBrokenInvariants) {
    EXPECT_THROW(SparseMatrix(2, 2, {0, 1}, {0}, {1.0}), DimensionError);
    EXPECT_THROW(SparseMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 2.0}), DimensionError);
    EXPECT_THROW(SparseMatrix(1, 2, {0, 2}, {1, 1}, {1.0, 2.0}), DimensionError);
    EXPECT_THROW(SparseMatrix(1, 2, {0, 1}, {2}, {1.0}), DimensionError);
    EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), DimensionError);
}

TEST(SparseMatrix, TripletsSumDuplicates) {
    const auto a = SparseMatrix::from_triplets(2, 2, {{1, 1, 2.0}, {0, 1, 1.0}, {1, 1, 3.0}});
    EXPECT_EQ(a.nnz(), 2u);
    EXPECT_EQ(a.to_dense(), (std::vector{0.0, 1.0, 0.0, 5.0}));
    EXPECT_EQ(a.transposed().transposed(), a);
}

TEST(SparseMatrix, MatrixMarketRoundTrip) {
    const auto a = random_sparse(13, 9, 0.3, 4);
    std::stringstream ss;
    write_matrix_market(ss, a);
    const auto text = ss.str();
    EXPECT_EQ(text.rfind("%%MatrixMarket matrix coordinate real general\n13 9 ", 0), 0u);
    EXPECT_EQ(read_matrix_market(ss), a);
    std::istringstream bad("%%MatrixMarket matrix array real general\n1 1\n1\n");
    EXPECT_THROW(read_matrix_market(bad), IoError);
}

TEST(TikhonovOperator, SpecExamples) {
    auto eye = make_operator(SparseMatrix::identity(2));
    auto aug = tikhonov_augment(eye, 1.0);
    EXPECT_EQ(aug->rows(), 4u);
    EXPECT_EQ(aug->apply(std::vector{1.0, 1.0}, kWp), (std::vector{1.0, 1.0, 1.0, 1.0}));

    auto zero = tikhonov_augment(eye, 0.0);
    EXPECT_EQ(zero->apply(std::vector{3.0, -2.0}, kWp), (std::vector{3.0, -2.0, 0.0, -0.0}));

    // (A^T A + lambda^2 I) = diag(1.25, 4.25) for A = diag(1, 2), lambda = 0.5.
    auto d = tikhonov_augment(make_operator(SparseMatrix::diagonal(std::vector{1.0, 2.0})), 0.5);
    const std::vector<double> x{2.0, -3.0};
    EXPECT_EQ(d->apply_transpose(d->apply(x, kWp), kWp), (std::vector{1.25 * 2.0, 4.25 * -3.0}));

    EXPECT_EQ(tikhonov_rhs(std::vector{1.0, 2.0}, 3), (std::vector{1.0, 2.0, 0.0, 0.0, 0.0}));
    EXPECT_THROW(tikhonov_augment(eye, -1.0), InvalidBoundError);
    EXPECT_THROW(aug->apply(std::vector{1.0}, kWp), DimensionError);
}

TEST(TikhonovOperator, LambdaZeroReproducesLeastSquares) {
    const auto a = random_sparse(30, 12, 0.4, 21);
    const auto b = random_vector(30, 22);
    const auto aug = tikhonov_augment(make_operator(a), 0.0);
    const auto rhs = tikhonov_rhs(b, a.cols());
    const auto x = direct_tikhonov_solve(a, b, 0.0);
    // Normal equations of the augmented system are those of A itself.
    const auto g_aug = aug->apply_transpose(aug->apply(x, kWp), kWp);
    const auto atb = aug->apply_transpose(rhs, kWp);
    EXPECT_LT(rel_diff(g_aug, atb), 1e-10);
}

TEST(LinearOperator, AdjointConsistency) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = random_sparse(25 + seed, 17, 0.25, seed);
        const auto op = make_operator(a);
        const auto x = random_vector(a.cols(), 100 + seed), y = random_vector(a.rows(), 200 + seed);
        const double lhs = dot(op->apply(x, kWp), y);
        const double rhs = dot(x, op->apply_transpose(y, kWp));
        EXPECT_LE(std::fabs(lhs - rhs), 1e-12 * norm(x) * norm(y) * a.frobenius_norm());

        const auto aug = tikhonov_augment(op, 0.3);
        const auto y2 = random_vector(aug->rows(), 300 + seed);
        EXPECT_LE(std::fabs(dot(aug->apply(x, kWp), y2) - dot(x, aug->apply_transpose(y2, kWp))),
                  1e-12 * norm(x) * norm(y2) * (a.frobenius_norm() + 0.3 * std::sqrt(double(a.cols()))));
    }
}

TEST(TikhonovOperator, AugmentationIdentity) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = random_sparse(20, 15, 0.3, 50 + seed);
        const double lambda = 0.1 * static_cast<double>(seed + 1);
        const auto aug = tikhonov_augment(make_operator(a), lambda);
        const auto x = random_vector(15, 70 + seed);
        const auto got = aug->apply_transpose(aug->apply(x, kWp), kWp);
        const Eigen::MatrixXd m = test::to_eigen(a);
        const Eigen::VectorXd want = m.transpose() * (m * test::to_eigen(x)) + lambda * lambda * test::to_eigen(x);
        EXPECT_LT(rel_diff(got, test::from_eigen(want)), 1e-12);
    }
}

TEST(TikhonovOperator, SpectralMapping) {
    const std::vector<double> sigma{0.01, 0.3, 1.0, 2.5, 7.0};
    const double lambda = 0.2;
    const auto sv = test::augmented_singular_values(SparseMatrix::diagonal(sigma), lambda);
    std::vector<double> want;
    for (double s : sigma) want.push_back(std::sqrt(s * s + lambda * lambda));
    std::sort(want.rbegin(), want.rend());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(sv(static_cast<Eigen::Index>(i)), want[i], 1e-10);
}

TEST(SigmaBounds, SpecExamples) {
    const auto b1 = estimate_sigma_bounds(*make_operator(SparseMatrix::identity(3)), 1.0, 50, 1);
    EXPECT_EQ(b1.lower, 1.0);
    EXPECT_GE(b1.upper, std::sqrt(2.0));
    EXPECT_LE(b1.upper, 1.05 * std::sqrt(2.0) * (1 + 1e-12));

    const auto b2 = estimate_sigma_bounds(*make_operator(SparseMatrix::diagonal(std::vector{1.0, 2.0, 3.0})), 0.5, 200, 2);
    EXPECT_EQ(b2.lower, 0.5);
    EXPECT_GE(b2.upper, std::sqrt(9.25));
    EXPECT_LE(b2.upper, 1.05 * std::sqrt(9.25) * (1 + 1e-12));

    EXPECT_THROW(estimate_sigma_bounds(*make_operator(SparseMatrix::identity(3)), 0.0, 10, 1), InvalidBoundError);
    EXPECT_THROW(estimate_sigma_bounds(*make_operator(SparseMatrix::identity(3)), 1.0, 0, 1), ConfigError);
}

TEST(SigmaBounds, UpperBoundCoversDenseSpectrum) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto a = random_sparse(100, 100, 0.05, 900 + seed);
        const double lambda = 0.1;
        const auto bounds = estimate_sigma_bounds(*make_operator(a), lambda, 200, seed);
        const double top = test::augmented_singular_values(a, lambda)(0);
        EXPECT_GE(bounds.upper, top);
        EXPECT_LE(bounds.upper, 1.05 * top * (1 + 1e-9));
    }
}

TEST(FilterFactor, Values) {
    EXPECT_EQ(filter_factor(0.7, 0.7), 0.5);
    EXPECT_EQ(filter_factor(3.0, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(filter_factor(2.0, 1.0), 0.8);
}

TEST(FilterFactor, Monotonicity) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const double s = u(rng), l = u(rng), ds = u(rng) * 0.1;
        EXPECT_LT(filter_factor(s, l), filter_factor(s + ds, l));
        EXPECT_GT(filter_factor(s, l), filter_factor(s, l + ds));
        EXPECT_GT(filter_factor(s, l), 0.0);
        EXPECT_LE(filter_factor(s, l), 1.0);
    }
}

TEST(DirectTikhonov, SpecExamples) {
    const std::vector<double> b{4.0, -2.0, 6.0};
    const auto x = direct_tikhonov_solve(SparseMatrix::identity(3), b, 1.0);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x[i], b[i] / 2);

    const auto a = SparseMatrix::from_dense(2, 2, std::vector{2.0, 1.0, 1.0, 3.0});
    const auto inv = direct_tikhonov_solve(a, std::vector{3.0, 5.0}, 0.0);  // solution (0.8, 1.4)
    EXPECT_NEAR(inv[0], 0.8, 1e-14);
    EXPECT_NEAR(inv[1], 1.4, 1e-14);

    const auto f = direct_tikhonov_solve(SparseMatrix::diagonal(std::vector{1.0, 2.0}), std::vector{2.0, 5.0}, 1.0);
    EXPECT_NEAR(f[0], 1.0, 1e-15);
    EXPECT_NEAR(f[1], 2.0, 1e-15);
}

TEST(DirectTikhonov, SingularWithoutRegularization) {
    const auto a = SparseMatrix::from_dense(2, 2, std::vector{1.0, 1.0, 1.0, 1.0});
    EXPECT_THROW(direct_tikhonov_solve(a, std::vector{1.0, 1.0}, 0.0), SingularSystemError);
    EXPECT_NO_THROW(direct_tikhonov_solve(a, std::vector{1.0, 1.0}, 0.1));
    EXPECT_THROW(direct_tikhonov_solve(a, std::vector{1.0}, 0.1), DimensionError);
}

TEST(DirectTikhonov, MatchesFilteredSvdExpansion) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto a = random_sparse(30, 20, 0.5, 400 + seed);
        const auto b = random_vector(30, 500 + seed);
        const double lambda = 0.05 + 0.1 * static_cast<double>(seed);
        const auto x = direct_tikhonov_solve(a, b, lambda);
        const auto want = test::filtered_svd_solution(a, b, lambda);
        EXPECT_LT(rel_diff(x, want), 1e-8) << "seed " << seed;
    }
}
