#include "contrastive/losses.hpp"

#include "contrastive/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace contrastive {

namespace {

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw NumericalError(std::string(what) + " is not finite");
}

// Scores of one anchor against its keys; index 0 is the positive key and
// 1..N the negatives.
struct KeyScores {
    std::vector<double> s1;  // <q1, k1>
    std::vector<double> s2;  // <q2, k2>, or <q2, k1> for strict negatives
    std::vector<double> ds2; // |q2 - k2|^2
    std::vector<double> d1;  // |q1 - k1|^2
};

struct Needs {
    bool s1 = false;
    bool s2 = false;
    bool ds2 = false;
    bool d1 = false;

    bool head2() const noexcept { return s2 || ds2; }
};

Needs needs_for(const LossSpec& spec) {
    Needs n;
    switch (spec.kind) {
    case LossKind::Triplet: n.d1 = true; break;
    case LossKind::InfoNce: n.s1 = true; break;
    case LossKind::JaccardTriplet:
    case LossKind::JaccardContrastive: n.s1 = n.ds2 = true; break;
    case LossKind::Combined: {
        const double third = spec.weights.jaccard_weight();
        n.s1 = spec.weights.alpha1 != 0.0 || third != 0.0;
        n.s2 = spec.weights.alpha2 != 0.0;
        n.ds2 = third != 0.0;
        break;
    }
    }
    return n;
}

const Vector& key1(const AnchorEmbeddings& a, std::size_t k) {
    return k == 0 ? a.head1.positive : a.head1.negatives[k - 1];
}

const Vector& key2(const AnchorEmbeddings& a, std::size_t k) {
    return k == 0 ? a.head2.positive : a.head2.negatives[k - 1];
}

// Key that pairs with q2 in the s2 score.
const Vector& s2_key(const AnchorEmbeddings& a, std::size_t k, bool strict) {
    return (k > 0 && strict) ? key1(a, k) : key2(a, k);
}

void check_anchor_shape(const AnchorEmbeddings& a, const Needs& needs) {
    if (a.head1.negatives.empty()) throw DomainError("anchor loss: at least one negative key is required");
    if (needs.head2() && a.head2.negatives.size() != a.head1.negatives.size()) {
        throw DimensionError("anchor loss: head 1 has " + std::to_string(a.head1.negatives.size()) +
                             " negatives but head 2 has " + std::to_string(a.head2.negatives.size()));
    }
}

KeyScores compute_scores(const LossSpec& spec, const AnchorEmbeddings& a, const Needs& needs) {
    const std::size_t keys = a.head1.negatives.size() + 1;
    KeyScores sc;
    if (needs.s1) sc.s1.resize(keys);
    if (needs.s2) sc.s2.resize(keys);
    if (needs.ds2) sc.ds2.resize(keys);
    if (needs.d1) sc.d1.resize(keys);
    for (std::size_t k = 0; k < keys; ++k) {
        if (needs.s1) sc.s1[k] = dot(a.head1.query, key1(a, k));
        if (needs.s2) sc.s2[k] = dot(a.head2.query, s2_key(a, k, spec.mixed_head_negatives));
        if (needs.ds2) sc.ds2[k] = sq_euclid(a.head2.query, key2(a, k));
        if (needs.d1) sc.d1[k] = sq_euclid(a.head1.query, key1(a, k));
    }
    return sc;
}

KeyScores zero_like(const KeyScores& sc) {
    return {std::vector<double>(sc.s1.size()), std::vector<double>(sc.s2.size()),
            std::vector<double>(sc.ds2.size()), std::vector<double>(sc.d1.size())};
}

ContrastiveBatchScores contrastive_scores(const std::vector<double>& s, double tau) {
    return {s.front(), std::vector<double>(s.begin() + 1, s.end()), tau};
}

JaccardBatchScores jaccard_scores(const KeyScores& sc, double tau) {
    return {sc.s1.front(), std::vector<double>(sc.s1.begin() + 1, sc.s1.end()), sc.ds2.front(),
            std::vector<double>(sc.ds2.begin() + 1, sc.ds2.end()), tau};
}

void accumulate(std::vector<double>& g, double weight, const ScoreLossOutput& out) {
    g[0] += weight * out.d_pos;
    for (std::size_t j = 0; j < out.d_neg.size(); ++j) g[j + 1] += weight * out.d_neg[j];
}

void accumulate(KeyScores& g, double weight, const JaccardLossOutput& out) {
    g.s1[0] += weight * out.d_s1_pos;
    g.ds2[0] += weight * out.d_ds2_pos;
    for (std::size_t j = 0; j < out.d_s1_neg.size(); ++j) {
        g.s1[j + 1] += weight * out.d_s1_neg[j];
        g.ds2[j + 1] += weight * out.d_ds2_neg[j];
    }
}

// Loss value for one anchor plus d(loss)/d(score) for every score it read.
double score_loss(const LossSpec& spec, const KeyScores& sc, KeyScores& g) {
    switch (spec.kind) {
    case LossKind::Triplet: {
        const std::size_t n = sc.d1.size() - 1;
        const double inv_n = 1.0 / static_cast<double>(n);
        double value = 0.0;
        for (std::size_t j = 1; j <= n; ++j) {
            const double h = triplet_hinge(sc.d1[0], sc.d1[j], spec.margin);
            value += h;
            if (h > 0.0) {
                g.d1[0] += inv_n;
                g.d1[j] -= inv_n;
            }
        }
        return value * inv_n;
    }
    case LossKind::InfoNce: {
        const auto out = infonce_loss(contrastive_scores(sc.s1, spec.tau));
        accumulate(g.s1, 1.0, out);
        return out.value;
    }
    case LossKind::JaccardTriplet: {
        const auto out = jaccard_triplet_loss(jaccard_scores(sc, spec.tau), spec.jaccard);
        accumulate(g, 1.0, out);
        return out.value;
    }
    case LossKind::JaccardContrastive: {
        const auto out = jaccard_contrastive_loss(jaccard_scores(sc, spec.tau), spec.jaccard);
        accumulate(g, 1.0, out);
        return out.value;
    }
    case LossKind::Combined: {
        const double a1 = spec.weights.alpha1;
        const double a2 = spec.weights.alpha2;
        const double a3 = spec.weights.jaccard_weight();
        double value = 0.0;
        if (a1 != 0.0) {
            const auto out = infonce_loss(contrastive_scores(sc.s1, spec.tau));
            accumulate(g.s1, a1, out);
            value += a1 * out.value;
        }
        if (a2 != 0.0) {
            const auto out = infonce_loss(contrastive_scores(sc.s2, spec.tau));
            accumulate(g.s2, a2, out);
            value += a2 * out.value;
        }
        if (a3 != 0.0) {
            const auto out = jaccard_contrastive_loss(jaccard_scores(sc, spec.tau), spec.jaccard);
            accumulate(g, a3, out);
            value += a3 * out.value;
        }
        return value;
    }
    }
    throw DomainError("score_loss: unknown loss kind");
}

HeadEmbeddings zero_head_like(const HeadEmbeddings& h) {
    HeadEmbeddings z{Vector(h.query.dim()), Vector(h.positive.dim()), {}};
    z.negatives.reserve(h.negatives.size());
    for (const auto& n : h.negatives) z.negatives.emplace_back(n.dim());
    return z;
}

Vector& grad_key1(AnchorEmbeddings& g, std::size_t k) {
    return k == 0 ? g.head1.positive : g.head1.negatives[k - 1];
}

Vector& grad_key2(AnchorEmbeddings& g, std::size_t k) {
    return k == 0 ? g.head2.positive : g.head2.negatives[k - 1];
}

// Pushes score gradients onto the embeddings:
//   d<q,k>/dq = k,  d|q-k|^2/dq = 2(q - k)  (and the mirrored terms for k).
void chain_to_embeddings(const LossSpec& spec, const AnchorEmbeddings& a, const KeyScores& g,
                         AnchorEmbeddings& out) {
    const std::size_t keys = a.head1.negatives.size() + 1;
    for (std::size_t k = 0; k < keys; ++k) {
        if (!g.s1.empty() && g.s1[k] != 0.0) {
            out.head1.query.axpy(g.s1[k], key1(a, k));
            grad_key1(out, k).axpy(g.s1[k], a.head1.query);
        }
        if (!g.d1.empty() && g.d1[k] != 0.0) {
            const Vector diff = a.head1.query - key1(a, k);
            out.head1.query.axpy(2.0 * g.d1[k], diff);
            grad_key1(out, k).axpy(-2.0 * g.d1[k], diff);
        }
        if (!g.s2.empty() && g.s2[k] != 0.0) {
            const bool mixed = k > 0 && spec.mixed_head_negatives;
            out.head2.query.axpy(g.s2[k], s2_key(a, k, spec.mixed_head_negatives));
            (mixed ? grad_key1(out, k) : grad_key2(out, k)).axpy(g.s2[k], a.head2.query);
        }
        if (!g.ds2.empty() && g.ds2[k] != 0.0) {
            const Vector diff = a.head2.query - key2(a, k);
            out.head2.query.axpy(2.0 * g.ds2[k], diff);
            grad_key2(out, k).axpy(-2.0 * g.ds2[k], diff);
        }
    }
}

} // namespace

std::string_view to_string(LossKind kind) noexcept {
    switch (kind) {
    case LossKind::Triplet: return "triplet";
    case LossKind::InfoNce: return "infonce";
    case LossKind::JaccardTriplet: return "jaccard_triplet";
    case LossKind::JaccardContrastive: return "jaccard_contrastive";
    case LossKind::Combined: return "combined";
    }
    return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
    for (auto kind : {LossKind::Triplet, LossKind::InfoNce, LossKind::JaccardTriplet,
                      LossKind::JaccardContrastive, LossKind::Combined}) {
        if (to_string(kind) == name) return kind;
    }
    throw ConfigError("unknown loss kind '" + std::string(name) +
                      "' (expected triplet, infonce, jaccard_triplet, jaccard_contrastive or combined)");
}

void ContrastiveBatchScores::validate() const {
    if (s_neg.empty()) throw DomainError("contrastive scores: at least one negative is required");
    if (!(tau > 0.0)) throw DomainError("contrastive scores: tau must be > 0");
    require_finite(s_pos, "contrastive scores: s_pos");
    for (double s : s_neg) require_finite(s, "contrastive scores: s_neg");
}

void JaccardBatchScores::validate() const {
    if (s1_neg.empty()) throw DomainError("jaccard scores: at least one negative is required");
    if (s1_neg.size() != ds2_neg.size()) {
        throw DimensionError("jaccard scores: " + std::to_string(s1_neg.size()) + " similarities vs " +
                             std::to_string(ds2_neg.size()) + " dissimilarities");
    }
    if (!(tau > 0.0)) throw DomainError("jaccard scores: tau must be > 0");
    if (ds2_pos < 0.0) throw DomainError("jaccard scores: ds2_pos must be >= 0");
    for (double d : ds2_neg) {
        if (d < 0.0) throw DomainError("jaccard scores: ds2_neg must be >= 0");
    }
}

double LossWeights::jaccard_weight() const noexcept { return std::max(0.0, 1.0 - alpha1 - alpha2); }

void LossWeights::validate() const {
    if (!(alpha1 >= 0.0 && alpha1 <= 1.0) || !(alpha2 >= 0.0 && alpha2 <= 1.0)) {
        throw DomainError("loss weights: alpha1 and alpha2 must lie in [0, 1]");
    }
    if (alpha1 + alpha2 > 1.0 + 1e-12) throw DomainError("loss weights: alpha1 + alpha2 must be <= 1");
}

void LossSpec::validate() const {
    if (!(tau > 0.0)) throw DomainError("loss: tau must be > 0");
    if (!(margin >= 0.0)) throw DomainError("loss: margin must be >= 0");
    if (!(jaccard.epsilon >= 0.0)) throw DomainError("loss: jaccard epsilon must be >= 0");
    weights.validate();
}

ScoreLossOutput softmax_contrastive(double logit_pos, std::span<const double> logit_neg) {
    // z_0 = 0 for the positive, z_j = l_j - l_pos for the negatives.
    std::vector<double> z(logit_neg.size() + 1, 0.0);
    for (std::size_t j = 0; j < logit_neg.size(); ++j) z[j + 1] = logit_neg[j] - logit_pos;
    const double lse = log_sum_exp(z);

    ScoreLossOutput out;
    out.value = lse;
    out.d_neg.resize(logit_neg.size());
    double neg_mass = 0.0;
    for (std::size_t j = 0; j < logit_neg.size(); ++j) {
        const double p = std::exp(z[j + 1] - lse);
        out.d_neg[j] = p;
        neg_mass += p;
    }
    out.d_pos = -neg_mass;
    return out;
}

ScoreLossOutput infonce_loss(const ContrastiveBatchScores& scores) {
    scores.validate();
    std::vector<double> logits(scores.s_neg.size());
    for (std::size_t j = 0; j < logits.size(); ++j) logits[j] = scores.s_neg[j] / scores.tau;
    auto out = softmax_contrastive(scores.s_pos / scores.tau, logits);
    out.d_pos /= scores.tau;
    for (double& d : out.d_neg) d /= scores.tau;
    return out;
}

BoundCheck triplet_bound_chain(double contrastive_value, const ContrastiveBatchScores& scores) {
    scores.validate();
    BoundCheck b;
    b.lhs = contrastive_value;
    double hinge_sum = 0.0;
    for (double s : scores.s_neg) {
        const double gap = (s - scores.s_pos) / scores.tau;
        b.mid = std::max(b.mid, gap);
        hinge_sum += std::max(0.0, gap);
    }
    b.rhs = hinge_sum / static_cast<double>(scores.s_neg.size());
    b.holds = std::isfinite(b.lhs) && b.lhs >= b.mid - kBoundSlack && b.mid >= b.rhs - kBoundSlack;
    return b;
}

BoundCheck mean_triplet_bound_check(const ContrastiveBatchScores& scores) {
    return triplet_bound_chain(infonce_loss(scores).value, scores);
}

double triplet_hinge(double d_pos, double d_neg, double margin) {
    if (!(margin >= 0.0)) throw DomainError("triplet loss: margin must be >= 0");
    return std::max(0.0, d_pos - d_neg + margin);
}

JaccardLossOutput jaccard_triplet_loss(const JaccardBatchScores& scores, const JaccardParams& params) {
    scores.validate();
    const std::size_t n = scores.s1_neg.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    JaccardLossOutput out;
    out.d_s1_neg.resize(n);
    out.d_ds2_neg.resize(n);

    const double j_pos = jaccard_ratio(scores.s1_pos, scores.ds2_pos, params);
    const auto g_pos = jaccard_ratio_grad(scores.s1_pos, scores.ds2_pos, params);
    double neg_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        neg_sum += jaccard_ratio(scores.s1_neg[i], scores.ds2_neg[i], params);
        const auto g = jaccard_ratio_grad(scores.s1_neg[i], scores.ds2_neg[i], params);
        out.d_s1_neg[i] = inv_n * g.d_similarity;
        out.d_ds2_neg[i] = inv_n * g.d_dissimilarity;
    }
    out.value = -j_pos + neg_sum * inv_n;
    out.d_s1_pos = -g_pos.d_similarity;
    out.d_ds2_pos = -g_pos.d_dissimilarity;
    return out;
}

JaccardLossOutput jaccard_contrastive_loss(const JaccardBatchScores& scores, const JaccardParams& params) {
    scores.validate();
    const std::size_t n = scores.s1_neg.size();
    const double inv_tau = 1.0 / scores.tau;

    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) logits[i] = jaccard_ratio(scores.s1_neg[i], scores.ds2_neg[i], params) * inv_tau;
    const double logit_pos = jaccard_ratio(scores.s1_pos, scores.ds2_pos, params) * inv_tau;
    const auto soft = softmax_contrastive(logit_pos, logits);

    JaccardLossOutput out;
    out.value = soft.value;
    const auto g_pos = jaccard_ratio_grad(scores.s1_pos, scores.ds2_pos, params);
    out.d_s1_pos = soft.d_pos * inv_tau * g_pos.d_similarity;
    out.d_ds2_pos = soft.d_pos * inv_tau * g_pos.d_dissimilarity;
    out.d_s1_neg.resize(n);
    out.d_ds2_neg.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = jaccard_ratio_grad(scores.s1_neg[i], scores.ds2_neg[i], params);
        out.d_s1_neg[i] = soft.d_neg[i] * inv_tau * g.d_similarity;
        out.d_ds2_neg[i] = soft.d_neg[i] * inv_tau * g.d_dissimilarity;
    }
    return out;
}

bool uses_head2(const LossSpec& spec) { return needs_for(spec).head2(); }

LossOutput anchor_loss(const LossSpec& spec, const AnchorEmbeddings& anchor) {
    spec.validate();
    const Needs needs = needs_for(spec);
    check_anchor_shape(anchor, needs);

    const KeyScores sc = compute_scores(spec, anchor, needs);
    KeyScores g = zero_like(sc);
    LossOutput out;
    out.value = score_loss(spec, sc, g);
    require_finite(out.value, "anchor loss value");
    out.grad.head1 = zero_head_like(anchor.head1);
    out.grad.head2 = zero_head_like(anchor.head2);
    chain_to_embeddings(spec, anchor, g, out.grad);
    return out;
}

LossOutput triplet_loss(const Vector& h_q, const Vector& h_pos, const Vector& h_neg, double margin) {
    LossSpec spec;
    spec.kind = LossKind::Triplet;
    spec.margin = margin;
    AnchorEmbeddings a;
    a.head1 = {h_q, h_pos, {h_neg}};
    return anchor_loss(spec, a);
}

LossOutput combined_loss(const AnchorEmbeddings& anchor, const LossWeights& weights, double tau,
                         const JaccardParams& jaccard, bool mixed_head_negatives) {
    LossSpec spec;
    spec.kind = LossKind::Combined;
    spec.tau = tau;
    spec.weights = weights;
    spec.jaccard = jaccard;
    spec.mixed_head_negatives = mixed_head_negatives;
    return anchor_loss(spec, anchor);
}

AnchorEmbeddings anchor_view(const BatchEmbeddings& batch, std::size_t i, bool with_head2) {
    const std::size_t b = batch.size();
    AnchorEmbeddings a;
    a.head1.query = batch.anchor1[i];
    a.head1.positive = batch.positive1[i];
    a.head1.negatives.reserve(b - 1);
    for (std::size_t j = 0; j < b; ++j) {
        if (j != i) a.head1.negatives.push_back(batch.positive1[j]);
    }
    if (with_head2) {
        a.head2.query = batch.anchor2[i];
        a.head2.positive = batch.positive2[i];
        a.head2.negatives.reserve(b - 1);
        for (std::size_t j = 0; j < b; ++j) {
            if (j != i) a.head2.negatives.push_back(batch.positive2[j]);
        }
    }
    return a;
}

BatchLossOutput batch_loss(const LossSpec& spec, const BatchEmbeddings& batch) {
    spec.validate();
    const std::size_t b = batch.size();
    if (b < 2) throw DomainError("batch loss: batch size must be >= 2 for in-batch negatives");
    if (batch.positive1.size() != b) throw DimensionError("batch loss: anchor/positive count mismatch");
    const bool with_head2 = needs_for(spec).head2() || (!batch.anchor2.empty());
    if (with_head2 && (batch.anchor2.size() != b || batch.positive2.size() != b)) {
        throw DimensionError("batch loss: head-2 embeddings missing or mis-sized");
    }

    BatchLossOutput out;
    auto zeros_like = [](const std::vector<Vector>& v) {
        std::vector<Vector> z;
        z.reserve(v.size());
        for (const auto& x : v) z.emplace_back(x.dim());
        return z;
    };
    out.grad.anchor1 = zeros_like(batch.anchor1);
    out.grad.positive1 = zeros_like(batch.positive1);
    out.grad.anchor2 = zeros_like(batch.anchor2);
    out.grad.positive2 = zeros_like(batch.positive2);

    const double inv_b = 1.0 / static_cast<double>(b);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const LossOutput lo = anchor_loss(spec, anchor_view(batch, i, with_head2));
        total += lo.value;
        out.grad.anchor1[i].axpy(inv_b, lo.grad.head1.query);
        out.grad.positive1[i].axpy(inv_b, lo.grad.head1.positive);
        if (with_head2) {
            out.grad.anchor2[i].axpy(inv_b, lo.grad.head2.query);
            out.grad.positive2[i].axpy(inv_b, lo.grad.head2.positive);
        }
        std::size_t k = 0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            out.grad.positive1[j].axpy(inv_b, lo.grad.head1.negatives[k]);
            if (with_head2) out.grad.positive2[j].axpy(inv_b, lo.grad.head2.negatives[k]);
            ++k;
        }
    }
    out.value = total * inv_b;
    return out;
}

double max_relative_error(const std::function<double(std::span<const double>)>& f,
                          std::span<const double> x, std::span<const double> analytic, double h,
                          double floor) {
    if (!(h >= 1e-7 && h <= 1e-4)) throw DomainError("gradient check: step h must lie in [1e-7, 1e-4]");
    if (x.size() != analytic.size()) throw DimensionError("gradient check: gradient/input size mismatch");
    std::vector<double> probe(x.begin(), x.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
    return worst;
}

std::vector<double> flatten(const AnchorEmbeddings& anchor) {
    std::vector<double> flat;
    auto push = [&](const Vector& v) { flat.insert(flat.end(), v.begin(), v.end()); };
    for (const HeadEmbeddings* h : {&anchor.head1, &anchor.head2}) {
        push(h->query);
        push(h->positive);
        for (const auto& n : h->negatives) push(n);
    }
    return flat;
}

AnchorEmbeddings unflatten(const AnchorEmbeddings& shape, std::span<const double> values) {
    AnchorEmbeddings out = shape;
    std::size_t pos = 0;
    auto pull = [&](Vector& v) {
        if (pos + v.dim() > values.size()) throw DimensionError("unflatten: not enough values");
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), v.dim(), v.begin());
        pos += v.dim();
    };
    for (HeadEmbeddings* h : {&out.head1, &out.head2}) {
        pull(h->query);
        pull(h->positive);
        for (auto& n : h->negatives) pull(n);
    }
    if (pos != values.size()) throw DimensionError("unflatten: too many values");
    return out;
}

double loss_grad_check(const LossSpec& spec, const AnchorEmbeddings& anchor, double h) {
    const LossOutput analytic = anchor_loss(spec, anchor);
    const auto x = flatten(anchor);
    const auto g = flatten(analytic.grad);
    return max_relative_error(
        [&](std::span<const double> values) { return anchor_loss(spec, unflatten(anchor, values)).value; },
        x, g, h);
}

} // namespace contrastive
