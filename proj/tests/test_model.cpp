#include "contrastive/error.hpp"
#include "contrastive/losses.hpp"
#include "contrastive/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace contrastive;

namespace {

ModelSpec small_spec(Activation act) {
    ModelSpec s;
    s.encoder = {{2, 8, 4}, act, false};
    s.projector = {{4, 3}, act, true};
    return s;
}

std::vector<Vector> random_inputs(Rng& rng, std::size_t n, std::size_t d) {
    std::vector<Vector> x;
    for (std::size_t i = 0; i < n; ++i) x.push_back(rng_normal(rng, d, 0, 1));
    return x;
}

std::vector<double> flat_params(const BiProjectorModel& m) {
    std::vector<double> out;
    for (const auto& b : parameter_blocks(m)) out.insert(out.end(), b.values.begin(), b.values.end());
    return out;
}

void set_params(BiProjectorModel& m, std::span<const double> v) {
    std::size_t pos = 0;
    for (auto& b : parameter_blocks(m)) {
        for (double& x : b.values) x = v[pos++];
    }
}

// Loss of a 2B-sample forward where rows [0, B) are anchors and [B, 2B) positives.
double model_loss(const BiProjectorModel& m, const std::vector<Vector>& x, const LossSpec& spec,
                  std::vector<Vector>* d1 = nullptr, std::vector<Vector>* d2 = nullptr) {
    const ForwardResult f = forward(m, x);
    const std::size_t b = x.size() / 2;
    BatchEmbeddings e;
    for (std::size_t i = 0; i < b; ++i) {
        e.anchor1.push_back(f.h1[i].vector);
        e.positive1.push_back(f.h1[b + i].vector);
        e.anchor2.push_back(f.h2[i].vector);
        e.positive2.push_back(f.h2[b + i].vector);
    }
    const BatchLossOutput out = batch_loss(spec, e);
    if (d1) {
        *d1 = out.grad.anchor1;
        d1->insert(d1->end(), out.grad.positive1.begin(), out.grad.positive1.end());
        *d2 = out.grad.anchor2;
        d2->insert(d2->end(), out.grad.positive2.begin(), out.grad.positive2.end());
    }
    return out.value;
}

} // namespace

TEST(Model, HeadsAreUnitNorm) {
    const BiProjectorModel m = init(ModelSpec{}, Rng(1));
    Rng rng(2);
    const ForwardResult f = forward(m, random_inputs(rng, 50, 2));
    for (std::size_t i = 0; i < 50; ++i) {
        EXPECT_NEAR(norm(f.h1[i].vector), 1.0, 1e-12);
        EXPECT_NEAR(norm(f.h2[i].vector), 1.0, 1e-12);
        EXPECT_EQ(f.h1[i].projector, 1);
        EXPECT_EQ(f.h2[i].projector, 2);
        EXPECT_EQ(f.h1[i].sample, i);
    }
}

TEST(Model, ForwardIsDeterministic) {
    const BiProjectorModel a = init(ModelSpec{}, Rng(3));
    const BiProjectorModel b = init(ModelSpec{}, Rng(3));
    EXPECT_EQ(flat_params(a), flat_params(b));
    Rng rng(4);
    const auto x = random_inputs(rng, 10, 2);
    const ForwardResult fa = forward(a, x);
    const ForwardResult fb = forward(b, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(fa.h1[i].vector, fb.h1[i].vector);
        EXPECT_EQ(fa.h2[i].vector, fb.h2[i].vector);
    }
    EXPECT_NE(flat_params(init(ModelSpec{}, Rng(5))), flat_params(a));
}

TEST(Model, HeadsShareTheEncoderOutput) {
    const BiProjectorModel m = init(ModelSpec{}, Rng(6));
    const Vector x{0.3, -1.2};
    const ForwardResult f = forward(m, x);
    const Vector feat = mlp_apply(m.encoder, x);
    EXPECT_EQ(f.features[0], feat);
    EXPECT_EQ(f.h1[0].vector, mlp_apply(m.projector1, feat));
    EXPECT_EQ(f.h2[0].vector, mlp_apply(m.projector2, feat));
}

TEST(Model, ProjectorsAreDistinct) {
    const BiProjectorModel m = init(ModelSpec{}, Rng(7));
    EXPECT_NE(m.projector1.layers[0].weight, m.projector2.layers[0].weight);
    const ForwardResult f = forward(m, Vector{1.0, 0.5});
    EXPECT_NE(f.h1[0].vector, f.h2[0].vector);
}

TEST(Model, InitScaleFollowsFanIn) {
    ModelSpec s;
    s.encoder = {{100, 400, 8}, Activation::ReLU, false};
    s.projector = {{8, 4}, Activation::ReLU, true};
    const BiProjectorModel m = init(s, Rng(8));
    const Matrix& w = m.encoder.layers[0].weight;
    double sum = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t c = 0; c < w.cols(); ++c) {
            sum += w(r, c);
            sq += w(r, c) * w(r, c);
        }
    }
    const double n = static_cast<double>(w.size());
    const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_NEAR(sd, std::sqrt(2.0 / 100.0), 0.1 * std::sqrt(2.0 / 100.0));
    for (double b : m.encoder.layers[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(Model, ZeroUpstreamGradientGivesZeroParameterGradients) {
    const BiProjectorModel m = init(ModelSpec{}, Rng(9));
    Rng rng(10);
    const auto x = random_inputs(rng, 6, 2);
    const ForwardResult f = forward(m, x);
    const std::vector<Vector> zeros(6, Vector(16));
    const ParameterGradients g = backward(m, f.tape, zeros, zeros);
    for (double v : flat_params(g)) EXPECT_EQ(v, 0.0);
}

TEST(Model, EmptyHeadGradientLeavesThatProjectorUntouched) {
    const BiProjectorModel m = init(ModelSpec{}, Rng(11));
    Rng rng(12);
    const auto x = random_inputs(rng, 6, 2);
    const ForwardResult f = forward(m, x);
    std::vector<Vector> d1;
    for (int i = 0; i < 6; ++i) d1.push_back(rng_normal(rng, 16, 0, 1));
    const ParameterGradients g = backward(m, f.tape, d1, {});
    for (const auto& b : parameter_blocks(g)) {
        bool any = false;
        for (double v : b.values) any |= v != 0.0;
        if (b.name.starts_with("projector2")) {
            EXPECT_FALSE(any) << b.name;
        }
    }
}

TEST(Model, FirstHeadOnlyLossGivesZeroSecondProjectorGradient) {
    const BiProjectorModel m = init(small_spec(Activation::Tanh), Rng(13));
    Rng rng(14);
    const auto x = random_inputs(rng, 8, 2);
    LossSpec spec;
    spec.weights = {1, 0};
    std::vector<Vector> d1, d2;
    model_loss(m, x, spec, &d1, &d2);
    const ParameterGradients g = backward(m, forward(m, x).tape, d1, d2);
    for (const auto& layer : g.projector2.layers) {
        for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
            for (std::size_t c = 0; c < layer.weight.cols(); ++c) EXPECT_EQ(layer.weight(r, c), 0.0);
        }
        for (double v : layer.bias) EXPECT_EQ(v, 0.0);
    }
}

TEST(Model, EndToEndGradientsMatchFiniteDifferences) {
    const LossWeights configs[] = {{1, 0}, {0, 1}, {1.0 / 3, 1.0 / 3}};
    Rng rng(15);
    int checked = 0;
    for (const LossWeights& w : configs) {
        LossSpec spec;
        spec.weights = w;
        for (int trial = 0; trial < 3; ++trial) {
            const BiProjectorModel m = init(small_spec(Activation::Tanh), rng.fork(static_cast<std::uint64_t>(trial)));
            // Inputs spread far apart so no two embeddings coincide.
            const auto x = random_inputs(rng, 8, 2);
            const ForwardResult f = forward(m, x);
            bool near_clamp = false;
            for (std::size_t i = 0; i < 4; ++i) {
                for (std::size_t j = 0; j < 4; ++j) {
                    const double s = dot(f.h1[i].vector, f.h1[4 + j].vector);
                    near_clamp |= std::abs(s) < 0.05;
                }
            }
            if (w.alpha1 + w.alpha2 < 1.0 && near_clamp) continue;
            std::vector<Vector> d1, d2;
            model_loss(m, x, spec, &d1, &d2);
            const auto g = flat_params(backward(m, f.tape, d1, d2));
            const auto p = flat_params(m);
            auto loss = [&](std::span<const double> v) {
                BiProjectorModel q = m;
                set_params(q, v);
                return model_loss(q, x, spec);
            };
            EXPECT_LT(max_relative_error(loss, p, g, 1e-5), 1e-4) << w.alpha1 << "," << w.alpha2;
            ++checked;
        }
    }
    EXPECT_GE(checked, 6);
}

TEST(Model, ValidationRejectsBadShapes) {
    ModelSpec s;
    s.projector = {{16, 8}, Activation::ReLU, true};
    EXPECT_THROW(s.validate(), ConfigError);
    EXPECT_THROW((MlpSpec{{4}, Activation::ReLU, false}.validate()), ConfigError);
    const BiProjectorModel m = init(ModelSpec{}, Rng(16));
    EXPECT_THROW(forward(m, Vector{1, 2, 3}), DimensionError);
}

TEST(Model, ParameterCountMatchesShapes) {
    const BiProjectorModel m = init(small_spec(Activation::ReLU), Rng(17));
    EXPECT_EQ(parameter_count(m), (2 * 8 + 8) + (8 * 4 + 4) + 2 * (4 * 3 + 3));
}

TEST(Model, EmbedPicksTheRequestedLayer) {
    const BiProjectorModel m = init(ModelSpec{}, Rng(18));
    const Matrix pts{{0.1, 0.2}, {-1, 3}};
    const auto enc = embed(m, pts, Representation::Encoder);
    const auto p2 = embed(m, pts, Representation::Projector2);
    EXPECT_EQ(enc[1], mlp_apply(m.encoder, pts.row_vector(1)));
    EXPECT_EQ(p2[0], mlp_apply(m.projector2, mlp_apply(m.encoder, pts.row_vector(0))));
    EXPECT_EQ(parse_representation("projector1"), Representation::Projector1);
    EXPECT_THROW(parse_representation("head3"), ConfigError);
    EXPECT_THROW(parse_activation("gelu"), ConfigError);
}
