#include "contrastive/optimizer.hpp"

#include "contrastive/error.hpp"

#include <cmath>

namespace contrastive {

std::string_view to_string(OptimizerKind kind) noexcept { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
    if (name == "sgd") return OptimizerKind::SGD;
    if (name == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void OptimizerConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("optimizer: learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer: beta1 and beta2 must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be > 0");
}

void step(OptimizerState& state, std::span<const ParameterBlock> params, std::span<const ConstParameterBlock> grads) {
    if (params.size() != grads.size()) throw DimensionError("optimizer: parameter/gradient block count mismatch");
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].values.size() != grads[b].values.size()) {
            throw DimensionError("optimizer: gradient shape mismatch in block " + params[b].name);
        }
        if (!all_finite(grads[b].values)) throw NumericalError("optimizer: non-finite gradient in block " + grads[b].name);
    }
    if (state.first.empty()) {
        for (const auto& p : params) {
            state.first.emplace_back(p.values.size(), 0.0);
            if (state.config.kind == OptimizerKind::Adam) state.second.emplace_back(p.values.size(), 0.0);
        }
    }
    if (state.first.size() != params.size()) throw DimensionError("optimizer: state does not match parameter blocks");

    ++state.steps;
    const auto& c = state.config;
    const double t = static_cast<double>(state.steps);
    const double correct1 = 1.0 - std::pow(c.beta1, t);
    const double correct2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b].values;
        auto g = grads[b].values;
        auto& m = state.first[b];
        if (c.kind == OptimizerKind::SGD) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = c.momentum * m[i] + g[i];
                p[i] -= c.learning_rate * m[i];
            }
        } else {
            auto& v = state.second[b];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                const double m_hat = m[i] / correct1;
                const double v_hat = v[i] / correct2;
                p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.eps);
            }
        }
    }
}

void step(OptimizerState& state, BiProjectorModel& model, const ParameterGradients& grads) {
    const auto p = parameter_blocks(model);
    const auto g = parameter_blocks(grads);
    step(state, p, g);
}

} // namespace contrastive
