#include "contrastive/similarity.hpp"

#include "contrastive/error.hpp"

#include <algorithm>
#include <cmath>

namespace contrastive {

namespace {

void check_dissimilarity(double ds) {
    if (ds < 0.0) throw DomainError("jaccard_ratio: dissimilarity must be >= 0");
    if (!std::isfinite(ds)) throw NumericalError("jaccard_ratio: non-finite dissimilarity");
}

double numerator(double s, const JaccardParams& params) {
    if (!std::isfinite(s)) throw NumericalError("jaccard_ratio: non-finite similarity");
    return params.clamp_similarity ? std::max(s, 0.0) : s;
}

double denominator(double num, double ds, const JaccardParams& params) {
    const double den = num + ds + params.epsilon;
    if (!(den > 0.0)) throw NumericalError("jaccard_ratio: non-positive denominator (unclamped ratio)");
    return den;
}

} // namespace

double cosine_sim(const Vector& a, const Vector& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine_sim: zero-norm input");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double inner_product(const Vector& a, const Vector& b) { return dot(a, b); }

double jaccard_ratio(double s, double ds, const JaccardParams& params) {
    check_dissimilarity(ds);
    const double num = numerator(s, params);
    return num / denominator(num, ds, params);
}

JaccardGrad jaccard_ratio_grad(double s, double ds, const JaccardParams& params) {
    check_dissimilarity(ds);
    const double num = numerator(s, params);
    if (params.clamp_similarity && s <= 0.0) return {};
    const double den = denominator(num, ds, params);
    const double den2 = den * den;
    return {(ds + params.epsilon) / den2, -num / den2};
}

double pair_score(SimilarityKind kind, const Vector& a, const Vector& b) {
    switch (kind) {
    case SimilarityKind::CosineSim: return cosine_sim(a, b);
    case SimilarityKind::InnerProduct: return inner_product(a, b);
    case SimilarityKind::SqEuclid: return sq_euclid(a, b);
    case SimilarityKind::JaccardRatio:
        throw DomainError("pair_score: JaccardRatio needs a (similarity, dissimilarity) pair");
    }
    throw DomainError("pair_score: unknown similarity kind");
}

} // namespace contrastive
