#include "contrastive/data.hpp"
#include "contrastive/error.hpp"
#include "contrastive/eval.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace contrastive;

namespace {

std::vector<Vector> rows(const Matrix& m) {
    std::vector<Vector> out;
    for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(m.row_vector(r));
    return out;
}

AugmentationSpec noise_only(double std) {
    AugmentationSpec a;
    a.gaussian_noise_std = std;
    a.scale_jitter = 0.0;
    return a;
}

} // namespace

TEST(Blobs, ZeroStdPutsEveryPointOnItsCenter) {
    Rng rng(1);
    const Dataset d = make_blobs(rng, 4, 25, 3, 10.0, 0.0);
    ASSERT_EQ(d.size(), 100u);
    EXPECT_EQ(d.num_classes(), 4u);
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (d.labels[i] == d.labels[j]) {
                EXPECT_EQ(d.point(i), d.point(j));
            }
        }
        for (double c : d.point(i)) {
            EXPECT_GE(c, -5.0);
            EXPECT_LE(c, 5.0);
        }
    }
}

TEST(Blobs, SeparableBlobsGivePerfectNearestNeighbour) {
    Rng rng(2);
    const Dataset d = make_blobs(rng, 3, 60, 2, 20.0, 0.05);
    Rng split_rng(3);
    const DatasetSplit s = split_dataset(d, 0.3, split_rng);
    const EvalReport r = knn_evaluate(rows(s.train.points), s.train.labels, rows(s.test.points), s.test.labels, 1);
    EXPECT_EQ(r.top1_accuracy, 1.0);
}

TEST(Circles, NoiselessRadiiAreExact) {
    Rng rng(4);
    const Dataset d = make_circles(rng, 50, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_NEAR(norm(d.point(i)), d.labels[i] == 0 ? 1.0 : 2.0, 1e-12);
    }
}

TEST(Moons, NoiselessPointsLieOnTheirArcs) {
    Rng rng(5);
    const Dataset d = make_moons(rng, 40, 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Vector p = d.point(i);
        if (d.labels[i] == 0) {
            EXPECT_NEAR(p[0] * p[0] + p[1] * p[1], 1.0, 1e-12);
            EXPECT_GE(p[1], -1e-12);
        } else {
            EXPECT_NEAR((1 - p[0]) * (1 - p[0]) + (0.5 - p[1]) * (0.5 - p[1]), 1.0, 1e-12);
            EXPECT_LE(p[1], 0.5 + 1e-12);
        }
    }
}

TEST(Moons, NotLinearlySeparableButNeighbourSeparable) {
    Rng rng(6);
    const Dataset d = make_moons(rng, 150, 0.0);
    Rng split_rng(7);
    const DatasetSplit s = split_dataset(d, 0.3, split_rng);
    const auto tr = rows(s.train.points), te = rows(s.test.points);
    EXPECT_EQ(knn_evaluate(tr, s.train.labels, te, s.test.labels, 1).top1_accuracy, 1.0);
    EXPECT_LT(linear_probe(tr, s.train.labels, te, s.test.labels, 500, 0.1).top1_accuracy, 0.9);
}

TEST(Augment, RotationByPiNegates) {
    const Vector x{0.3, -0.7};
    const Vector r = rotate2d(x, std::numbers::pi);
    EXPECT_NEAR(r[0], -0.3, 1e-15);
    EXPECT_NEAR(r[1], 0.7, 1e-15);
    EXPECT_THROW(rotate2d(Vector{1, 2, 3}, 0.1), DimensionError);
}

TEST(Augment, NoiseDisplacementScalesWithRootDim) {
    Rng rng(8);
    const std::size_t d = 16;
    const Vector x(d);
    double sq = 0.0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) sq += sq_euclid(augment(rng, x, noise_only(0.1)), x);
    EXPECT_NEAR(std::sqrt(sq / n), 0.1 * std::sqrt(static_cast<double>(d)), 0.03 * 0.1 * std::sqrt(16.0));
}

TEST(Augment, IdentityAndValidation) {
    Rng rng(9);
    const Vector x{1, 2};
    AugmentationSpec id = noise_only(0.0);
    EXPECT_TRUE(id.is_identity());
    EXPECT_EQ(augment(rng, x, id), x);
    EXPECT_THROW(id.validate(), ConfigError);
    AugmentationSpec bad;
    bad.coordinate_dropout_prob = 1.0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Augment, DropoutZeroesCoordinates) {
    Rng rng(10);
    AugmentationSpec a = noise_only(0.0);
    a.coordinate_dropout_prob = 0.5;
    const Vector x(1000, 1.0);
    const Vector v = augment(rng, x, a);
    std::size_t zeros = 0;
    for (double c : v) {
        if (c == 0.0) {
            ++zeros;
        } else {
            EXPECT_EQ(c, 1.0);
        }
    }
    EXPECT_NEAR(static_cast<double>(zeros), 500.0, 60.0);
}

TEST(MakeBatch, SmallestBatch) {
    Rng rng(11);
    const Dataset d = make_blobs(rng, 2, 5, 2, 4.0, 0.1);
    const ContrastiveBatch b = make_batch(rng, d, 2, AugmentationSpec{});
    ASSERT_EQ(b.size(), 2u);
    EXPECT_NE(b.source[0], b.source[1]);
    EXPECT_NE(b.anchors[0], b.positives[0]);
    EXPECT_THROW(make_batch(rng, d, 1, AugmentationSpec{}), DomainError);
    EXPECT_THROW(make_batch(rng, d, 11, AugmentationSpec{}), DomainError);
}

TEST(MakeBatch, IndicesAreDistinctAndViewsComeFromTheirSource) {
    Rng rng(12);
    const Dataset d = make_blobs(rng, 3, 20, 2, 50.0, 0.0);
    const AugmentationSpec a = noise_only(0.01);
    for (int t = 0; t < 50; ++t) {
        const ContrastiveBatch b = make_batch(rng, d, 16, a);
        EXPECT_EQ(std::set<std::size_t>(b.source.begin(), b.source.end()).size(), 16u);
        for (std::size_t i = 0; i < 16; ++i) {
            EXPECT_LT(sq_euclid(b.anchors[i], d.point(b.source[i])), 0.01);
            EXPECT_LT(sq_euclid(b.positives[i], d.point(b.source[i])), 0.01);
        }
    }
}

TEST(MakeBatch, SamplingIsUniform) {
    Rng rng(13);
    const Dataset d = make_blobs(rng, 2, 10, 2, 4.0, 0.1);
    std::vector<double> counts(d.size());
    const int batches = 20000;
    for (int t = 0; t < batches; ++t) {
        for (std::size_t s : make_batch(rng, d, 5, noise_only(0.1)).source) counts[s] += 1;
    }
    const double expected = batches * 5.0 / static_cast<double>(d.size());
    for (double c : counts) EXPECT_NEAR(c, expected, 0.05 * expected);
}

TEST(Split, SizesAndDisjointness) {
    Rng rng(14);
    const Dataset d = make_moons(rng, 50, 0.1);
    Rng a(15), b(15);
    const DatasetSplit s1 = split_dataset(d, 0.3, a);
    const DatasetSplit s2 = split_dataset(d, 0.3, b);
    EXPECT_EQ(s1.test.size(), 30u);
    EXPECT_EQ(s1.train.size(), 70u);
    EXPECT_EQ(s1.test.points, s2.test.points);
    for (std::size_t i = 0; i < s1.test.size(); ++i) {
        for (std::size_t j = 0; j < s1.train.size(); ++j) EXPECT_NE(s1.test.point(i), s1.train.point(j));
    }
    EXPECT_THROW(split_dataset(d, 0.0, a), ConfigError);
}

TEST(Csv, RoundTripIsExact) {
    testutil::TempDir dir;
    Rng rng(16);
    const Dataset d = make_circles(rng, 20, 0.2);
    write_csv(dir / "c.csv", d);
    const Dataset back = read_csv(dir / "c.csv");
    EXPECT_EQ(back.points, d.points);
    EXPECT_EQ(back.labels, d.labels);
    EXPECT_EQ(testutil::slurp(dir / "c.csv").substr(0, 9), "f0,f1,lab");
}

TEST(Csv, ErrorsNameTheLine) {
    testutil::TempDir dir;
    auto message = [&](const std::string& text) {
        testutil::spit(dir / "bad.csv", text);
        try {
            read_csv(dir / "bad.csv");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message("f0,f1,label\n1,2,0\n3,x,1\n").find("bad.csv:3"), std::string::npos);
    EXPECT_NE(message("f0,f1,label\n1,2,0,4\n").find("bad.csv:2"), std::string::npos);
    EXPECT_NE(message("x0,label\n1,0\n").find("bad.csv:1"), std::string::npos);
    EXPECT_NE(message("").find("empty"), std::string::npos);
    EXPECT_NE(message("f0,label\n1,0\n2,2\n").find("contiguous"), std::string::npos);
}

TEST(Dataset, FactoriesRejectBadArguments) {
    Rng rng(17);
    EXPECT_THROW(make_moons(rng, 0, 0.1), DomainError);
    EXPECT_THROW(make_circles(rng, 10, -1.0), DomainError);
    EXPECT_THROW(make_blobs(rng, 0, 10, 2, 1.0, 0.1), DomainError);
}
