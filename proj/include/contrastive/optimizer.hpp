#pragma once

#include "contrastive/model.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace contrastive {

enum class OptimizerKind { SGD, Adam };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double momentum = 0.9; // SGD
    double beta1 = 0.9;    // Adam
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

/// Moment buffers mirror the parameter blocks they were first stepped with.
/// SGD keeps its velocity in `first`; Adam uses `first` and `second`.
struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t steps = 0;
    std::vector<std::vector<double>> first;
    std::vector<std::vector<double>> second;
};

/// SGD:  v <- momentum * v + g;  p <- p - lr * v
/// Adam: bias-corrected first/second moments, p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Throws NumericalError naming the block if any gradient is non-finite; the
/// parameters are left untouched in that case.
void step(OptimizerState& state, std::span<const ParameterBlock> params, std::span<const ConstParameterBlock> grads);

void step(OptimizerState& state, BiProjectorModel& model, const ParameterGradients& grads);

} // namespace contrastive
