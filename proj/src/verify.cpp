#include "contrastive/verify.hpp"

#include "contrastive/error.hpp"
#include "contrastive/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

namespace contrastive {

namespace {

using ojson = nlohmann::ordered_json;

class Timer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

PropertyResult make_result(std::string name, double tolerance) {
    PropertyResult r;
    r.name = std::move(name);
    r.tolerance = tolerance;
    return r;
}

void record(PropertyResult& r, double violation, const std::function<ojson()>& instance) {
    ++r.instances;
    r.worst = std::max(r.worst, violation);
    if (!(violation <= r.tolerance)) {
        if (r.failures == 0) r.failing_instance = instance();
        ++r.failures;
    }
}

Vector random_unit(Rng& rng, std::size_t dim) {
    while (true) {
        Vector v = rng_normal(rng, dim, 0.0, 1.0);
        if (norm(v) > 1e-3) return l2_normalize(v);
    }
}

HeadEmbeddings random_head(Rng& rng, std::size_t dim, std::size_t n_neg) {
    HeadEmbeddings h{random_unit(rng, dim), random_unit(rng, dim), {}};
    for (std::size_t j = 0; j < n_neg; ++j) h.negatives.push_back(random_unit(rng, dim));
    return h;
}

ojson head_json(const HeadEmbeddings& h) {
    ojson neg = ojson::array();
    for (const auto& n : h.negatives) neg.push_back(n.values());
    return {{"query", h.query.values()}, {"positive", h.positive.values()}, {"negatives", neg}};
}

ojson anchor_json(const LossSpec& spec, const AnchorEmbeddings& a) {
    return {{"loss", std::string(to_string(spec.kind))},
            {"tau", spec.tau},
            {"alpha1", spec.weights.alpha1},
            {"alpha2", spec.weights.alpha2},
            {"margin", spec.margin},
            {"head1", head_json(a.head1)},
            {"head2", head_json(a.head2)}};
}

constexpr double kJaccardKink = 0.05;
constexpr double kHingeKink = 1e-3;

// True when the loss is non-differentiable within reach of the FD stencil.
bool near_kink(const LossSpec& spec, const AnchorEmbeddings& a) {
    const HeadEmbeddings& h = a.head1;
    if (spec.kind == LossKind::Triplet) {
        const double dp = sq_euclid(h.query, h.positive);
        for (const auto& n : h.negatives) {
            if (std::abs(dp - sq_euclid(h.query, n) + spec.margin) < kHingeKink) return true;
        }
    }
    const bool jaccard = spec.kind == LossKind::JaccardTriplet || spec.kind == LossKind::JaccardContrastive ||
                         (spec.kind == LossKind::Combined && spec.weights.jaccard_weight() > 0.0);
    if (jaccard && spec.jaccard.clamp_similarity) {
        if (std::abs(dot(h.query, h.positive)) < kJaccardKink) return true;
        for (const auto& n : h.negatives) {
            if (std::abs(dot(h.query, n)) < kJaccardKink) return true;
        }
    }
    return false;
}

LossSpec random_spec(Rng& rng, LossKind kind) {
    LossSpec spec;
    spec.kind = kind;
    spec.tau = rng.uniform(0.2, 1.0);
    spec.margin = rng.uniform(0.0, 0.5);
    const double a1 = rng.uniform();
    const double a2 = rng.uniform() * (1.0 - a1);
    spec.weights = {a1, a2};
    return spec;
}

std::vector<Vector> row_inputs(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<Vector> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(rng_normal(rng, dim, 0.0, 1.0));
    return out;
}

BatchEmbeddings batch_views(const ForwardResult& f, std::size_t b, bool head2) {
    BatchEmbeddings e;
    for (std::size_t i = 0; i < b; ++i) {
        e.anchor1.push_back(f.h1[i].vector);
        e.positive1.push_back(f.h1[b + i].vector);
        if (head2) {
            e.anchor2.push_back(f.h2[i].vector);
            e.positive2.push_back(f.h2[b + i].vector);
        }
    }
    return e;
}

// L2 normalization is singular at the origin; its curvature grows like
// 1/|z|^2 nearby.
constexpr double kNormalizeSingular = 0.25;

double min_output_norm(const GradientTape& tape) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : tape.samples) m = std::min({m, s.head1.output_norm, s.head2.output_norm});
    return m;
}

// Coincident embeddings make some parameter gradients cancel to exactly
// zero, leaving the central difference to report pure truncation error.
bool has_coincident_pair(const std::vector<Embedding>& h) {
    for (std::size_t i = 0; i < h.size(); ++i) {
        for (std::size_t j = i + 1; j < h.size(); ++j) {
            if (sq_euclid(h[i].vector, h[j].vector) < 1e-4) return true;
        }
    }
    return false;
}

bool batch_near_kink(const LossSpec& spec, const BatchEmbeddings& e) {
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (near_kink(spec, anchor_view(e, i, !e.anchor2.empty()))) return true;
    }
    return false;
}

} // namespace

PropertyResult check_lse_sandwich(const VerifyOptions& options) {
    Timer timer;
    PropertyResult r = make_result("lse_sandwich", 1e-12);
    Rng rng = Rng(options.seed).fork("lse_sandwich");
    for (std::size_t t = 0; t < options.instances; ++t) {
        const std::size_t n = 1 + rng.uniform_index(64);
        std::vector<double> y(n);
        for (double& v : y) v = rng.uniform(-30.0, 30.0);
        // A quarter of the sets carry extreme magnitudes.
        if (t % 4 == 1) y[rng.uniform_index(n)] = 1000.0;
        if (t % 4 == 2) y[rng.uniform_index(n)] = -1000.0;
        if (t % 4 == 3) {
            const double shift = rng.uniform() < 0.5 ? 1000.0 : -1000.0;
            for (double& v : y) v += shift;
        }
        const double lse = log_sum_exp(y);
        const double mx = *std::max_element(y.begin(), y.end());
        const double violation = std::max(mx - lse, lse - (mx + std::log(static_cast<double>(n))));
        record(r, std::max(violation, 0.0), [&] { return ojson{{"values", y}, {"lse", lse}}; });
    }
    r.seconds = timer.seconds();
    return r;
}

PropertyResult check_bound_chain(const VerifyOptions& options) {
    Timer timer;
    PropertyResult r = make_result("contrastive_triplet_bound", kBoundSlack);
    Rng rng = Rng(options.seed).fork("bound_chain");
    for (std::size_t t = 0; t < options.instances; ++t) {
        ContrastiveBatchScores s;
        const std::size_t n = 1 + rng.uniform_index(64);
        s.s_pos = rng.uniform(-1.0, 1.0);
        for (std::size_t j = 0; j < n; ++j) s.s_neg.push_back(rng.uniform(-1.0, 1.0));
        s.tau = rng.uniform(0.05, 2.0);
        const double lhs = options.infonce ? options.infonce(s) : infonce_loss(s).value;
        const BoundCheck b = triplet_bound_chain(lhs, s);
        const double violation = std::max({b.mid - b.lhs, b.rhs - b.mid, 0.0});
        record(r, std::isfinite(violation) ? violation : std::numeric_limits<double>::infinity(), [&] {
            return ojson{{"s_pos", s.s_pos}, {"s_neg", s.s_neg}, {"tau", s.tau},
                         {"lhs", b.lhs},     {"mid", b.mid},     {"rhs", b.rhs}};
        });
    }
    r.seconds = timer.seconds();
    return r;
}

PropertyResult check_loss_gradients(LossKind kind, const VerifyOptions& options) {
    Timer timer;
    PropertyResult r = make_result("grad_" + std::string(to_string(kind)), kGradTolerance);
    Rng rng = Rng(options.seed).fork(r.name);
    while (r.instances < options.grad_instances) {
        const LossSpec spec = random_spec(rng, kind);
        const std::size_t dim = 3 + rng.uniform_index(6);
        const std::size_t n_neg = 1 + rng.uniform_index(8);
        AnchorEmbeddings a{random_head(rng, dim, n_neg), random_head(rng, dim, n_neg)};
        if (near_kink(spec, a)) {
            ++r.excluded;
            continue;
        }
        const double err = loss_grad_check(spec, a, kVerifyStep);
        record(r, err, [&] { return anchor_json(spec, a); });
    }
    r.seconds = timer.seconds();
    return r;
}

PropertyResult check_model_gradients(const VerifyOptions& options) {
    Timer timer;
    PropertyResult r = make_result("grad_model", kGradTolerance);
    Rng rng = Rng(options.seed).fork("grad_model");
    constexpr LossKind kinds[] = {LossKind::Triplet, LossKind::InfoNce, LossKind::JaccardTriplet,
                                  LossKind::JaccardContrastive, LossKind::Combined};
    std::size_t t = 0;
    while (r.instances < options.grad_instances) {
        const LossSpec spec = random_spec(rng, kinds[t % 5]);
        ModelSpec ms;
        ms.encoder = {{2, 8, 4}, t % 2 == 0 ? Activation::ReLU : Activation::Tanh, false};
        ms.projector = {{4, 3}, ms.encoder.activation, true};
        ++t;
        BiProjectorModel model = init(ms, rng.fork(t));
        const std::size_t b = 2 + rng.uniform_index(3);
        const std::vector<Vector> x = row_inputs(rng, 2 * b, 2);
        const bool head2 = uses_head2(spec);

        ForwardResult f;
        try {
            f = forward(model, x);
        } catch (const DomainError&) {
            // A dead ReLU layer gave a zero projector output.
            ++r.excluded;
            continue;
        }
        const BatchEmbeddings views = batch_views(f, b, head2);
        if ((ms.encoder.activation == Activation::ReLU && f.tape.min_abs_relu_preactivation(model) < 1e-3) ||
            min_output_norm(f.tape) < kNormalizeSingular || has_coincident_pair(f.h1) || has_coincident_pair(f.h2) ||
            batch_near_kink(spec, views)) {
            ++r.excluded;
            continue;
        }
        const BatchLossOutput out = batch_loss(spec, views);
        std::vector<Vector> d1 = out.grad.anchor1;
        d1.insert(d1.end(), out.grad.positive1.begin(), out.grad.positive1.end());
        std::vector<Vector> d2;
        if (head2) {
            d2 = out.grad.anchor2;
            d2.insert(d2.end(), out.grad.positive2.begin(), out.grad.positive2.end());
        }
        const ParameterGradients g = backward(model, f.tape, d1, d2);

        std::vector<double> theta, analytic;
        for (const auto& blk : parameter_blocks(std::as_const(model))) theta.insert(theta.end(), blk.values.begin(), blk.values.end());
        for (const auto& blk : parameter_blocks(g)) analytic.insert(analytic.end(), blk.values.begin(), blk.values.end());

        BiProjectorModel probe = model;
        auto loss_at = [&](std::span<const double> values) {
            std::size_t pos = 0;
            for (auto& blk : parameter_blocks(probe)) {
                std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), blk.values.size(), blk.values.begin());
                pos += blk.values.size();
            }
            return batch_loss(spec, batch_views(forward(probe, x), b, head2)).value;
        };
        const double err = max_relative_error(loss_at, theta, analytic, kVerifyStep);
        record(r, err, [&] {
            ojson inputs = ojson::array();
            for (const auto& v : x) inputs.push_back(v.values());
            return ojson{{"loss", std::string(to_string(spec.kind))},
                         {"tau", spec.tau},
                         {"alpha1", spec.weights.alpha1},
                         {"alpha2", spec.weights.alpha2},
                         {"margin", spec.margin},
                         {"activation", std::string(to_string(ms.encoder.activation))},
                         {"parameters", theta},
                         {"inputs", inputs}};
        });
    }
    r.seconds = timer.seconds();
    return r;
}

namespace {

PropertyResult check_head_reduction(const VerifyOptions& options, const char* name, LossWeights weights, int head) {
    Timer timer;
    PropertyResult r = make_result(name, 1e-12);
    Rng rng = Rng(options.seed).fork(name);
    for (std::size_t t = 0; t < options.grad_instances; ++t) {
        const std::size_t dim = 2 + rng.uniform_index(15);
        const std::size_t n_neg = 1 + rng.uniform_index(16);
        const AnchorEmbeddings a{random_head(rng, dim, n_neg), random_head(rng, dim, n_neg)};
        const double tau = rng.uniform(0.05, 2.0);
        const double combined = combined_loss(a, weights, tau).value;
        const HeadEmbeddings& h = head == 1 ? a.head1 : a.head2;
        ContrastiveBatchScores s{dot(h.query, h.positive), {}, tau};
        for (const auto& n : h.negatives) s.s_neg.push_back(dot(h.query, n));
        const double reference = infonce_loss(s).value;
        record(r, std::abs(combined - reference), [&] {
            LossSpec spec;
            spec.tau = tau;
            spec.weights = weights;
            return anchor_json(spec, a);
        });
    }
    r.seconds = timer.seconds();
    return r;
}

} // namespace

PropertyResult check_reduction_alpha1(const VerifyOptions& options) {
    return check_head_reduction(options, "reduction_alpha1", {1.0, 0.0}, 1);
}

PropertyResult check_reduction_alpha2(const VerifyOptions& options) {
    return check_head_reduction(options, "reduction_alpha2", {0.0, 1.0}, 2);
}

PropertyResult check_uniform_jaccard(const VerifyOptions& options) {
    Timer timer;
    PropertyResult r = make_result("reduction_uniform_jaccard", 1e-9);
    Rng rng = Rng(options.seed).fork("uniform_jaccard");
    for (std::size_t t = 0; t < options.grad_instances; ++t) {
        const std::size_t dim = 2 + rng.uniform_index(15);
        const std::size_t n_neg = 1 + rng.uniform_index(64);
        const double tau = rng.uniform(0.05, 2.0);
        // Every key coincides, so every Jaccard score is the same.
        HeadEmbeddings h1{random_unit(rng, dim), random_unit(rng, dim), {}};
        HeadEmbeddings h2{random_unit(rng, dim), random_unit(rng, dim), {}};
        h1.negatives.assign(n_neg, h1.positive);
        h2.negatives.assign(n_neg, h2.positive);
        const double value = combined_loss({h1, h2}, {0.0, 0.0}, tau).value;
        const double expected = std::log(static_cast<double>(n_neg + 1));
        record(r, std::abs(value - expected), [&] {
            LossSpec spec;
            spec.tau = tau;
            spec.weights = {0.0, 0.0};
            return anchor_json(spec, {h1, h2});
        });
    }
    r.seconds = timer.seconds();
    return r;
}

std::vector<PropertyResult> run_all_properties(const VerifyOptions& options) {
    std::vector<PropertyResult> out;
    out.push_back(check_lse_sandwich(options));
    out.push_back(check_bound_chain(options));
    for (LossKind k : {LossKind::Triplet, LossKind::InfoNce, LossKind::JaccardTriplet, LossKind::JaccardContrastive,
                       LossKind::Combined}) {
        out.push_back(check_loss_gradients(k, options));
    }
    out.push_back(check_model_gradients(options));
    out.push_back(check_reduction_alpha1(options));
    out.push_back(check_reduction_alpha2(options));
    out.push_back(check_uniform_jaccard(options));
    return out;
}

void print_report(std::ostream& out, const std::vector<PropertyResult>& results) {
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %9s %8s %8s %11s %9s %8s  %s\n", "property", "instances", "failures",
                  "excluded", "worst", "tolerance", "seconds", "status");
    out << line;
    std::size_t passed = 0;
    std::size_t instances = 0;
    for (const auto& r : results) {
        std::snprintf(line, sizeof line, "%-28s %9zu %8zu %8zu %11.3e %9.1e %8.3f  %s\n", r.name.c_str(), r.instances,
                      r.failures, r.excluded, r.worst, r.tolerance, r.seconds, r.passed() ? "PASS" : "FAIL");
        out << line;
        passed += r.passed() ? 1 : 0;
        instances += r.instances;
    }
    out << results.size() << " properties run, " << instances << " instances, " << passed << " passed, "
        << results.size() - passed << " failed\n";
    for (const auto& r : results) {
        if (r.failing_instance) out << "failing instance [" << r.name << "]: " << r.failing_instance->dump() << "\n";
    }
}

} // namespace contrastive
