#pragma once

#include "contrastive/numerics.hpp"

namespace contrastive {

enum class SimilarityKind { CosineSim, InnerProduct, SqEuclid, JaccardRatio };

/// Denominator guard for s / (s + ds), covering the s = ds = 0 case.
inline constexpr double kJaccardEpsilon = 1e-6;

struct JaccardParams {
    double epsilon = kJaccardEpsilon;
    /// Clamp negative projector-1 similarities to 0 before forming the ratio.
    /// Disabling it is only meant for sensitivity runs; the raw ratio is
    /// undefined once s + ds + epsilon <= 0.
    bool clamp_similarity = true;
};

struct JaccardGrad {
    double d_similarity = 0.0;
    double d_dissimilarity = 0.0;
};

/// <a,b> / (|a||b|), clamped to [-1, 1]. Throws DomainError for zero vectors.
double cosine_sim(const Vector& a, const Vector& b);
double inner_product(const Vector& a, const Vector& b);

/// Measure-style Jaccard ratio between an "intersection" similarity s taken
/// from projector 1 and a squared distance ds taken from projector 2:
///   J = max(s, 0) / (max(s, 0) + ds + epsilon),  J in [0, 1).
/// Throws DomainError for ds < 0.
double jaccard_ratio(double s, double ds, const JaccardParams& params = {});

/// Partials of jaccard_ratio. In the clamped region (s <= 0) both are zero;
/// the subgradient at s = 0 is taken as 0.
JaccardGrad jaccard_ratio_grad(double s, double ds, const JaccardParams& params = {});

/// Generic pairwise score used by the losses.
double pair_score(SimilarityKind kind, const Vector& a, const Vector& b);

} // namespace contrastive
