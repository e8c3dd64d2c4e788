#include "contrastive/error.hpp"
#include "contrastive/numerics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace contrastive;

TEST(Dot, OrthogonalSelfAndMixed) {
    EXPECT_EQ(dot({1, 0}, {0, 1}), 0.0);
    EXPECT_EQ(dot({1, 1}, {1, 1}), 2.0);
    EXPECT_EQ(dot({3, 4}, {4, 3}), 3.0 * 4.0 + 4.0 * 3.0);
}

TEST(Dot, DimensionMismatchNamesBothDims) {
    try {
        dot({1, 2}, {1, 2, 3});
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find('2'), std::string::npos);
        EXPECT_NE(msg.find('3'), std::string::npos);
    }
}

TEST(Dot, SymmetricAndBilinear) {
    Rng rng(7);
    for (int t = 0; t < 100; ++t) {
        const Vector a = rng_normal(rng, 8, 0, 1);
        const Vector b = rng_normal(rng, 8, 0, 1);
        const Vector c = rng_normal(rng, 8, 0, 1);
        const double k = rng.uniform(-3, 3);
        EXPECT_NEAR(dot(a, b), dot(b, a), 1e-12);
        EXPECT_NEAR(dot(k * a + c, b), k * dot(a, b) + dot(c, b), 1e-12);
    }
}

TEST(L2Normalize, Examples) {
    const Vector a = l2_normalize({3, 4});
    EXPECT_NEAR(a[0], 0.6, 1e-15);
    EXPECT_NEAR(a[1], 0.8, 1e-15);
    EXPECT_EQ(l2_normalize({0, 5}), (Vector{0, 1}));
    EXPECT_EQ(l2_normalize({1, 1, 1, 1}), (Vector{0.5, 0.5, 0.5, 0.5}));
}

TEST(L2Normalize, ZeroVectorThrows) { EXPECT_THROW(l2_normalize({0, 0, 0}), DomainError); }

TEST(L2Normalize, UnitNormAndIdempotent) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const Vector a = rng_normal(rng, 1 + t % 16, 0, 10);
        const Vector n = l2_normalize(a);
        EXPECT_NEAR(norm(n), 1.0, 1e-12);
        const Vector nn = l2_normalize(n);
        for (std::size_t i = 0; i < n.dim(); ++i) EXPECT_NEAR(nn[i], n[i], 1e-12);
    }
}

TEST(SqEuclid, Examples) {
    EXPECT_EQ(sq_euclid({1, 0}, {1, 0}), 0.0);
    EXPECT_EQ(sq_euclid({1, 0}, {-1, 0}), 4.0);
    EXPECT_EQ(sq_euclid({1, 0}, {0, 1}), 2.0);
    EXPECT_THROW(sq_euclid({1}, {1, 2}), DimensionError);
}

TEST(SqEuclid, UnitVectorIdentity) {
    Rng rng(11);
    for (int t = 0; t < 100; ++t) {
        const Vector a = l2_normalize(rng_normal(rng, 5, 0, 1));
        const Vector b = l2_normalize(rng_normal(rng, 5, 0, 1));
        EXPECT_NEAR(sq_euclid(a, b), 2.0 - 2.0 * dot(a, b), 1e-12);
    }
}

TEST(LogSumExp, Examples) {
    const std::vector<double> zeros{0, 0};
    EXPECT_NEAR(log_sum_exp(zeros), std::log(2.0), 1e-15);
    const std::vector<double> single{-3.25};
    EXPECT_EQ(log_sum_exp(single), -3.25);
    const std::vector<double> big{1000, 1000};
    EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
}

TEST(LogSumExp, EmptyAndNonFiniteThrow) {
    EXPECT_THROW(log_sum_exp(std::vector<double>{}), DomainError);
    EXPECT_THROW(log_sum_exp(std::vector<double>{1.0, NAN}), NumericalError);
}

TEST(LogSumExp, SandwichAndShiftInvariance) {
    Rng rng(5);
    for (int t = 0; t < 2000; ++t) {
        const std::size_t n = 1 + rng.uniform_index(40);
        std::vector<double> y(n);
        for (double& v : y) v = rng.uniform(-50, 50);
        const double lse = log_sum_exp(y);
        const double mx = *std::max_element(y.begin(), y.end());
        EXPECT_LE(mx, lse + 1e-12);
        EXPECT_LE(lse, mx + std::log(static_cast<double>(n)) + 1e-12);

        const double c = rng.uniform(-5, 5);
        std::vector<double> shifted = y;
        for (double& v : shifted) v += c;
        EXPECT_NEAR(log_sum_exp(shifted), lse + c, 1e-12);
    }
}

TEST(Matvec, Examples) {
    const Vector v{1.5, -2.0, 0.25};
    EXPECT_EQ(matvec(Matrix::identity(3), v), v);
    EXPECT_EQ(matvec(Matrix(3, 3), v), Vector(3));
    EXPECT_EQ(matvec(Matrix{{1, 2}, {3, 4}}, Vector{1, 1}), (Vector{3, 7}));
    EXPECT_THROW(matvec(Matrix(2, 3), Vector{1, 1}), DimensionError);
}

TEST(Matvec, TransposedAndOuter) {
    const Matrix m{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(matvec_transposed(m, Vector{1, -1}), (Vector{-3, -3, -3}));
    const Matrix o = outer(Vector{1, 2}, Vector{3, 4, 5});
    EXPECT_EQ(o, (Matrix{{3, 4, 5}, {6, 8, 10}}));
    Matrix acc(2, 3);
    add_outer(acc, Vector{1, 2}, Vector{3, 4, 5}, 0.5);
    EXPECT_EQ(acc, (Matrix{{1.5, 2, 2.5}, {3, 4, 5}}));
}

TEST(Matrix, RejectsWrongElementCount) { EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError); }

TEST(RngNormal, DegenerateStd) {
    Rng rng(1);
    EXPECT_EQ(rng_normal(rng, 5, 2.5, 0.0), Vector(5, 2.5));
    EXPECT_THROW(rng_normal(rng, 1, 0, -1), DomainError);
}

TEST(RngNormal, Deterministic) {
    Rng a(99), b(99);
    EXPECT_EQ(rng_normal(a, 100, 0, 1), rng_normal(b, 100, 0, 1));
}

TEST(RngNormal, SampleMoments) {
    Rng rng(42);
    const Vector x = rng_normal(rng, 10000, 0.0, 1.0);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= 10000.0;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= 10000.0;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Rng, StreamsReproduceOverAMillionDraws) {
    Rng a(123), b(123);
    for (int i = 0; i < 1000000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, ForksAreIndependentOfParentConsumption) {
    Rng a(5);
    const Rng before = a.fork("init");
    a.next_u64();
    EXPECT_EQ(a.fork("init"), before);
    EXPECT_NE(a.fork("init").key(), a.fork("batches").key());
    EXPECT_NE(a.fork(std::uint64_t{0}).key(), a.fork(std::uint64_t{1}).key());
}

TEST(Rng, ResumesFromState) {
    Rng a(77);
    for (int i = 0; i < 10; ++i) a.next_u64();
    Rng b = Rng::from_state(a.key(), a.counter());
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformRangesAndIndex) {
    Rng rng(8);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const auto k = rng.uniform_index(7);
        ASSERT_LT(k, 7u);
        ++counts[k];
    }
    for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}
