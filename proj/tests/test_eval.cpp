#include "contrastive/error.hpp"
#include "contrastive/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace contrastive;

namespace {

struct Labelled {
    std::vector<Vector> x;
    std::vector<int> y;
};

Labelled random_points(Rng& rng, std::size_t n, std::size_t d, int classes) {
    Labelled out;
    for (std::size_t i = 0; i < n; ++i) {
        out.x.push_back(rng_normal(rng, d, 0, 1));
        out.y.push_back(static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes))));
    }
    return out;
}

// Sort-everything reference for two classes and odd k (no vote ties).
int brute_force_knn(const Labelled& train, const Vector& q, std::size_t k) {
    std::vector<std::size_t> order(train.x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sq_euclid(train.x[a], q) < sq_euclid(train.x[b], q); });
    int ones = 0;
    for (std::size_t i = 0; i < k; ++i) ones += train.y[order[i]];
    return 2 * ones > static_cast<int>(k) ? 1 : 0;
}

Labelled separable(Rng& rng, std::size_t per_class) {
    Labelled out;
    for (int c = 0; c < 3; ++c) {
        Vector center(3);
        center[static_cast<std::size_t>(c)] = 5.0;
        for (std::size_t i = 0; i < per_class; ++i) {
            out.x.push_back(center + rng_normal(rng, 3, 0, 0.3));
            out.y.push_back(c);
        }
    }
    return out;
}

} // namespace

TEST(Top1, Examples) {
    const std::vector<int> p{0, 1, 2, 1}, y{0, 1, 1, 1};
    EXPECT_EQ(top1(p, y), 0.75);
    EXPECT_EQ(top1(y, y), 1.0);
    EXPECT_THROW(top1(std::vector<int>{0}, y), DimensionError);
    EXPECT_THROW(top1(std::vector<int>{}, std::vector<int>{}), DomainError);
}

TEST(Knn, ExactMatchReturnsItsLabel) {
    Rng rng(1);
    const Labelled t = random_points(rng, 30, 4, 3);
    const auto pred = knn_classify(t.x, t.y, t.x, 1);
    EXPECT_EQ(pred, t.y);
    EXPECT_EQ(knn_evaluate(t.x, t.y, t.x, t.y, 1).top1_accuracy, 1.0);
}

TEST(Knn, FullKGivesTheMajority) {
    Rng rng(2);
    Labelled t = random_points(rng, 21, 3, 2);
    std::fill(t.y.begin(), t.y.end(), 0);
    for (int i = 0; i < 8; ++i) t.y[static_cast<std::size_t>(i)] = 1;
    const Labelled q = random_points(rng, 10, 3, 2);
    for (int p : knn_classify(t.x, t.y, q.x, t.x.size())) EXPECT_EQ(p, 0);
}

TEST(Knn, MatchesBruteForce) {
    Rng rng(3);
    for (std::size_t k : {1u, 3u, 7u}) {
        const Labelled t = random_points(rng, 80, 5, 2);
        const Labelled q = random_points(rng, 40, 5, 2);
        const auto pred = knn_classify(t.x, t.y, q.x, k);
        for (std::size_t i = 0; i < q.x.size(); ++i) EXPECT_EQ(pred[i], brute_force_knn(t, q.x[i], k));
    }
}

TEST(Knn, InvariantToTrainingOrderEvenWithTies) {
    Rng rng(4);
    Labelled t;
    // Integer grid with duplicates and equidistant neighbours.
    for (int i = 0; i < 60; ++i) {
        t.x.push_back(Vector{static_cast<double>(rng.uniform_index(4)), static_cast<double>(rng.uniform_index(4))});
        t.y.push_back(static_cast<int>(rng.uniform_index(3)));
    }
    std::vector<Vector> q;
    for (int i = 0; i < 25; ++i) q.push_back(Vector{0.5 * static_cast<double>(i % 5), 0.5 * static_cast<double>(i / 5)});
    for (std::size_t k : {1u, 2u, 4u, 6u}) {
        const auto base = knn_classify(t.x, t.y, q, k);
        Labelled p = t;
        for (int trial = 0; trial < 5; ++trial) {
            for (std::size_t i = p.x.size(); i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng.uniform_index(i));
                std::swap(p.x[i - 1], p.x[j]);
                std::swap(p.y[i - 1], p.y[j]);
            }
            EXPECT_EQ(knn_classify(p.x, p.y, q, k), base) << "k=" << k;
        }
    }
}

TEST(Knn, VoteTieGoesToTheCloserClass) {
    const std::vector<Vector> t{{0.0}, {1.0}, {-3.0}, {4.0}};
    const std::vector<int> y{1, 0, 1, 0};
    // k=2 from 0.4: neighbours 0 (label 1, d 0.4) and 1 (label 0, d 0.6).
    EXPECT_EQ(knn_classify(t, y, std::vector<Vector>{{0.4}}, 2)[0], 1);
    EXPECT_EQ(knn_classify(t, y, std::vector<Vector>{{0.6}}, 2)[0], 0);
}

TEST(Knn, RejectsBadArguments) {
    const std::vector<Vector> t{{0.0}, {1.0}};
    const std::vector<int> y{0, 1};
    EXPECT_THROW(knn_classify(t, y, t, 0), DomainError);
    EXPECT_THROW(knn_classify(t, y, t, 3), DomainError);
    EXPECT_THROW(knn_classify(t, std::vector<int>{0}, t, 1), DimensionError);
}

TEST(LinearProbe, SeparableClassesAreLearnedExactly) {
    Rng rng(5);
    const Labelled tr = separable(rng, 40), te = separable(rng, 20);
    const EvalReport r = linear_probe(tr.x, tr.y, te.x, te.y, 300, 0.5);
    EXPECT_EQ(r.top1_accuracy, 1.0);
    EXPECT_EQ(r.total, te.x.size());
    EXPECT_EQ(r.method, EvalMethod::Linear);
}

TEST(LinearProbe, ShuffledLabelsGiveChance) {
    Rng rng(6);
    const Labelled tr = random_points(rng, 500, 8, 10), te = random_points(rng, 2000, 8, 10);
    EXPECT_NEAR(linear_probe(tr.x, tr.y, te.x, te.y, 200, 0.1).top1_accuracy, 0.1, 0.05);
}

TEST(LinearProbe, TrainingLossDecreasesMonotonically) {
    Rng rng(7);
    const Labelled tr = random_points(rng, 200, 4, 3), te = random_points(rng, 50, 4, 3);
    const EvalReport r = linear_probe(tr.x, tr.y, te.x, te.y, 200, 0.1);
    ASSERT_GE(r.probe_loss_history.size(), 200u);
    EXPECT_NEAR(r.probe_loss_history.front(), std::log(3.0), 1e-12);
    for (std::size_t i = 1; i < r.probe_loss_history.size(); ++i) {
        EXPECT_LE(r.probe_loss_history[i], r.probe_loss_history[i - 1]);
    }
}

TEST(LinearProbe, InvariantToRotation) {
    Rng rng(8);
    const Labelled tr = random_points(rng, 150, 2, 2), te = random_points(rng, 100, 2, 2);
    const double a = 0.7;
    auto rot = [&](const std::vector<Vector>& v) {
        std::vector<Vector> out;
        for (const auto& x : v) out.push_back(Vector{std::cos(a) * x[0] - std::sin(a) * x[1],
                                                      std::sin(a) * x[0] + std::cos(a) * x[1]});
        return out;
    };
    const double base = linear_probe(tr.x, tr.y, te.x, te.y).top1_accuracy;
    EXPECT_EQ(linear_probe(rot(tr.x), tr.y, rot(te.x), te.y).top1_accuracy, base);
}

TEST(LinearProbe, NeedsTwoClasses) {
    const std::vector<Vector> x{{1.0, 0.0}, {0.0, 1.0}};
    EXPECT_THROW(linear_probe(x, std::vector<int>{0, 0}, x, std::vector<int>{0, 0}), DomainError);
}

TEST(EvalReport, JsonFields) {
    Rng rng(9);
    const Labelled t = random_points(rng, 20, 2, 2);
    const auto j = to_json(knn_evaluate(t.x, t.y, t.x, t.y, 3));
    EXPECT_EQ(j.at("k"), 3);
    EXPECT_EQ(j.at("total"), 20);
    EXPECT_TRUE(j.contains("top1_accuracy"));
}
