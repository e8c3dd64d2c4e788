#pragma once

// Contrastive loss family with analytic gradients.
//
// Two layers are exposed. Score-level losses take precomputed similarities
// (s+, s-_j, ds+, ds-_j) and return gradients with respect to those scores.
// Embedding-level losses take the head outputs for one anchor, or for a
// whole batch with in-batch negatives, and chain the score gradients back
// onto every input embedding.

#include "contrastive/numerics.hpp"
#include "contrastive/similarity.hpp"

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace contrastive {

enum class LossKind { Triplet, InfoNce, JaccardTriplet, JaccardContrastive, Combined };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view name);

struct ContrastiveBatchScores {
    double s_pos = 0.0;
    std::vector<double> s_neg;
    double tau = 1.0;

    void validate() const;
};

struct JaccardBatchScores {
    double s1_pos = 0.0;
    std::vector<double> s1_neg;
    double ds2_pos = 0.0;
    std::vector<double> ds2_neg;
    double tau = 1.0;

    void validate() const;
};

struct LossWeights {
    double alpha1 = 1.0 / 3.0;
    double alpha2 = 1.0 / 3.0;

    /// 1 - alpha1 - alpha2, never negative for validated weights.
    double jaccard_weight() const noexcept;
    void validate() const;
};

/// Result of a score-level InfoNCE-style loss.
struct ScoreLossOutput {
    double value = 0.0;
    double d_pos = 0.0;
    std::vector<double> d_neg;
};

/// Result of a score-level Jaccard loss.
struct JaccardLossOutput {
    double value = 0.0;
    double d_s1_pos = 0.0;
    double d_ds2_pos = 0.0;
    std::vector<double> d_s1_neg;
    std::vector<double> d_ds2_neg;
};

/// -log softmax of the positive logit against the negatives, computed as
/// LSE([0, l_j - l_pos]). Gradients are with respect to the logits.
ScoreLossOutput softmax_contrastive(double logit_pos, std::span<const double> logit_neg);

/// Temperature-scaled InfoNCE: log(1 + sum_j exp((s_j - s+) / tau)).
ScoreLossOutput infonce_loss(const ContrastiveBatchScores& scores);

/// The three links of the contrastive/triplet chain on tau-scaled scores:
///   lhs = contrastive value, mid = max(0, max_j (s_j - s+)/tau),
///   rhs = mean_j max(0, (s_j - s+)/tau)  (zero-margin triplet, d = -s).
struct BoundCheck {
    double lhs = 0.0;
    double mid = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

inline constexpr double kBoundSlack = 1e-9;

BoundCheck mean_triplet_bound_check(const ContrastiveBatchScores& scores);
/// Same chain, with the contrastive value supplied by the caller (used to
/// audit alternative InfoNCE implementations).
BoundCheck triplet_bound_chain(double contrastive_value, const ContrastiveBatchScores& scores);

/// max(0, d_pos - d_neg + margin); zero subgradient at the hinge.
double triplet_hinge(double d_pos, double d_neg, double margin);

/// -(1/N) sum_i (J+ - J-_i) with J the clamped Jaccard ratio. tau is unused.
JaccardLossOutput jaccard_triplet_loss(const JaccardBatchScores& scores, const JaccardParams& params = {});

/// InfoNCE over Jaccard ratios, each divided by tau before exponentiation.
JaccardLossOutput jaccard_contrastive_loss(const JaccardBatchScores& scores, const JaccardParams& params = {});

// ---------------------------------------------------------------------------
// Embedding level

/// One projector's view of an anchor: its query, its positive key and its
/// negative keys.
struct HeadEmbeddings {
    Vector query;
    Vector positive;
    std::vector<Vector> negatives;
};

struct AnchorEmbeddings {
    HeadEmbeddings head1;
    HeadEmbeddings head2;
};

/// Gradients are laid out exactly like the AnchorEmbeddings they came from;
/// heads a loss does not read come back as zero vectors of matching shape.
struct LossOutput {
    double value = 0.0;
    AnchorEmbeddings grad;
};

struct LossSpec {
    LossKind kind = LossKind::Combined;
    double tau = 0.5;
    LossWeights weights;
    double margin = 0.2;
    JaccardParams jaccard;
    /// Use the mixed-head negatives <h_q^(2), h_k-^(1)> in the second
    /// InfoNCE term of the combined loss instead of <h_q^(2), h_k-^(2)>.
    bool mixed_head_negatives = false;

    void validate() const;
};

/// Whether the loss reads projector-2 embeddings at all.
bool uses_head2(const LossSpec& spec);

/// Single-triplet margin loss on head-1 embeddings with d = squared
/// Euclidean distance. Throws DomainError for a negative margin.
LossOutput triplet_loss(const Vector& h_q, const Vector& h_pos, const Vector& h_neg, double margin);

/// a1 * InfoNCE(head 1) + a2 * InfoNCE(head 2) + (1 - a1 - a2) * Jaccard
/// contrastive(head-1 inner products, head-2 squared distances).
LossOutput combined_loss(const AnchorEmbeddings& anchor, const LossWeights& weights, double tau,
                         const JaccardParams& jaccard = {}, bool mixed_head_negatives = false);

/// Any configured loss for a single anchor. Triplet losses average over the
/// negatives.
LossOutput anchor_loss(const LossSpec& spec, const AnchorEmbeddings& anchor);

/// Views for a batch of B source points; index i of each array belongs to
/// source point i. Head-2 arrays may be empty for losses that only read
/// head 1.
struct BatchEmbeddings {
    std::vector<Vector> anchor1;
    std::vector<Vector> anchor2;
    std::vector<Vector> positive1;
    std::vector<Vector> positive2;

    std::size_t size() const noexcept { return anchor1.size(); }
};

struct BatchLossOutput {
    double value = 0.0;
    BatchEmbeddings grad;
};

/// Mean anchor loss over the batch. The negatives of anchor i are the
/// positives j != i in increasing j, so each anchor sees B - 1 negatives.
BatchLossOutput batch_loss(const LossSpec& spec, const BatchEmbeddings& batch);

/// Builds the per-anchor view batch_loss evaluates for anchor i.
AnchorEmbeddings anchor_view(const BatchEmbeddings& batch, std::size_t i, bool with_head2);

// ---------------------------------------------------------------------------
// Finite-difference verification

inline constexpr double kGradCheckFloor = 1e-5;

/// Worst per-coordinate |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// where numeric is the central difference (f(x+h) - f(x-h)) / 2h.
/// Throws DomainError unless h lies in [1e-7, 1e-4].
double max_relative_error(const std::function<double(std::span<const double>)>& f,
                          std::span<const double> x, std::span<const double> analytic,
                          double h = 1e-6, double floor = kGradCheckFloor);

std::vector<double> flatten(const AnchorEmbeddings& anchor);
/// Inverse of flatten, reusing `shape` for the layout.
AnchorEmbeddings unflatten(const AnchorEmbeddings& shape, std::span<const double> values);

/// Finite-difference audit of anchor_loss over every embedding coordinate.
double loss_grad_check(const LossSpec& spec, const AnchorEmbeddings& anchor, double h = 1e-6);

} // namespace contrastive
