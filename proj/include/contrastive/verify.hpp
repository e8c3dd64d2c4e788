#pragma once

// Randomized property suites over the loss family and the model: the
// LogSumExp sandwich, the contrastive/triplet bound chain, finite-difference
// gradient audits and the exact reductions of the combined loss.

#include "contrastive/losses.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace contrastive {

struct VerifyOptions {
    /// Instances for the score-level properties (sandwich, bound chain).
    std::size_t instances = 10000;
    /// Instances per gradient audit and per reduction identity.
    std::size_t grad_instances = 100;
    std::uint64_t seed = 1;
    /// Replaces infonce_loss inside the bound-chain property; lets tests
    /// confirm that a broken implementation is caught.
    std::function<double(const ContrastiveBatchScores&)> infonce;
};

struct PropertyResult {
    std::string name;
    std::size_t instances = 0;
    std::size_t failures = 0;
    std::size_t excluded = 0; // resampled because they sat near a kink
    double worst = 0.0;       // largest violation / error observed
    double tolerance = 0.0;
    double seconds = 0.0;
    std::optional<nlohmann::ordered_json> failing_instance; // first failure

    bool passed() const noexcept { return failures == 0 && instances > 0; }
};

// Gradient checks use this central-difference step.
inline constexpr double kVerifyStep = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

PropertyResult check_lse_sandwich(const VerifyOptions& options);
PropertyResult check_bound_chain(const VerifyOptions& options);
PropertyResult check_loss_gradients(LossKind kind, const VerifyOptions& options);
PropertyResult check_model_gradients(const VerifyOptions& options);
PropertyResult check_reduction_alpha1(const VerifyOptions& options);
PropertyResult check_reduction_alpha2(const VerifyOptions& options);
PropertyResult check_uniform_jaccard(const VerifyOptions& options);

std::vector<PropertyResult> run_all_properties(const VerifyOptions& options);

/// Fixed-width pass/fail table followed by a totals line.
void print_report(std::ostream& out, const std::vector<PropertyResult>& results);

} // namespace contrastive
