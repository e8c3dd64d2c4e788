#include "contrastive/model.hpp"

#include <algorithm>

#include "contrastive/error.hpp"

#include <cmath>
#include <limits>

namespace contrastive {

namespace {

double activate(Activation a, double z) {
    return a == Activation::ReLU ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative in terms of the pre-activation; ReLU takes 0 at the kink.
double activate_grad(Activation a, double z) {
    if (a == Activation::ReLU) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

Mlp init_mlp(const MlpSpec& spec, const Rng& rng) {
    Mlp mlp{spec, {}};
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        const std::size_t fan_in = spec.layer_widths[l];
        const std::size_t fan_out = spec.layer_widths[l + 1];
        Rng layer_rng = rng.fork(static_cast<std::uint64_t>(l));
        const Vector w = rng_normal(layer_rng, fan_in * fan_out, 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        mlp.layers.push_back({Matrix(fan_out, fan_in, w.values()), Vector(fan_out)});
    }
    return mlp;
}

void check_mlp(const Mlp& mlp, const char* name) {
    mlp.spec.validate();
    if (mlp.layers.size() + 1 != mlp.spec.layer_widths.size()) {
        throw DimensionError(std::string(name) + ": layer count does not match its spec");
    }
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        const auto& layer = mlp.layers[l];
        if (layer.weight.cols() != mlp.spec.layer_widths[l] || layer.weight.rows() != mlp.spec.layer_widths[l + 1] ||
            layer.bias.dim() != mlp.spec.layer_widths[l + 1]) {
            throw DimensionError(std::string(name) + ": layer " + std::to_string(l) + " has the wrong shape");
        }
    }
}

MlpTrace run_mlp(const Mlp& mlp, const Vector& x) {
    if (x.dim() != mlp.spec.input_dim()) {
        throw DimensionError("forward: input has dim " + std::to_string(x.dim()) + ", network expects " +
                             std::to_string(mlp.spec.input_dim()));
    }
    MlpTrace t;
    t.inputs.reserve(mlp.layers.size());
    t.preactivations.reserve(mlp.layers.size());
    Vector a = x;
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        const auto& layer = mlp.layers[l];
        Vector z = matvec(layer.weight, a);
        z += layer.bias;
        t.inputs.push_back(std::move(a));
        if (l + 1 < mlp.layers.size()) {
            a = z;
            for (double& v : a) v = activate(mlp.spec.activation, v);
        } else {
            a = z;
        }
        t.preactivations.push_back(std::move(z));
    }
    if (mlp.spec.final_normalize) {
        t.output_norm = norm(a);
        t.output = l2_normalize(a);
    } else {
        t.output = std::move(a);
    }
    return t;
}

// Returns dLoss/dInput and accumulates parameter gradients.
Vector backprop_mlp(const Mlp& mlp, const MlpTrace& t, const Vector& d_out, Mlp& grads) {
    Vector delta = d_out;
    if (mlp.spec.final_normalize) {
        // d(z/|z|)/dz = (I - h h^T) / |z|
        const double proj = dot(t.output, delta);
        delta.axpy(-proj, t.output);
        delta *= 1.0 / t.output_norm;
    }
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        if (l + 1 < mlp.layers.size()) {
            const Vector& z = t.preactivations[l];
            for (std::size_t i = 0; i < delta.dim(); ++i) delta[i] *= activate_grad(mlp.spec.activation, z[i]);
        }
        add_outer(grads.layers[l].weight, delta, t.inputs[l]);
        grads.layers[l].bias += delta;
        delta = matvec_transposed(mlp.layers[l].weight, delta);
    }
    return delta;
}

template <typename Model, typename Block>
std::vector<Block> collect_blocks(Model& model) {
    std::vector<Block> blocks;
    auto add = [&](auto& mlp, const char* name) {
        for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
            const std::string prefix = std::string(name) + "." + std::to_string(l);
            blocks.push_back({prefix + ".weight", mlp.layers[l].weight.span()});
            blocks.push_back({prefix + ".bias", mlp.layers[l].bias.span()});
        }
    };
    add(model.encoder, "encoder");
    add(model.projector1, "projector1");
    add(model.projector2, "projector2");
    return blocks;
}

} // namespace

std::string_view to_string(Activation a) noexcept { return a == Activation::ReLU ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

void MlpSpec::validate() const {
    if (layer_widths.size() < 2) throw ConfigError("mlp spec: at least two layer widths are required");
    for (std::size_t w : layer_widths) {
        if (w == 0) throw ConfigError("mlp spec: layer widths must be positive");
    }
}

void ModelSpec::validate() const {
    encoder.validate();
    projector.validate();
    if (projector.input_dim() != encoder.output_dim()) {
        throw ConfigError("model spec: projector input width " + std::to_string(projector.input_dim()) +
                          " does not match encoder output width " + std::to_string(encoder.output_dim()));
    }
}

void BiProjectorModel::validate() const {
    check_mlp(encoder, "encoder");
    check_mlp(projector1, "projector1");
    check_mlp(projector2, "projector2");
    for (const Mlp* head : {&projector1, &projector2}) {
        if (head->spec.input_dim() != encoder.spec.output_dim()) {
            throw DimensionError("model: projector input width must equal encoder output width");
        }
        if (!head->spec.final_normalize) throw DomainError("model: projector outputs must be L2-normalized");
    }
}

BiProjectorModel zeros_like(const BiProjectorModel& model) {
    BiProjectorModel z = model;
    for (auto& block : parameter_blocks(z)) std::fill(block.values.begin(), block.values.end(), 0.0);
    return z;
}

std::vector<ParameterBlock> parameter_blocks(BiProjectorModel& model) {
    return collect_blocks<BiProjectorModel, ParameterBlock>(model);
}

std::vector<ConstParameterBlock> parameter_blocks(const BiProjectorModel& model) {
    return collect_blocks<const BiProjectorModel, ConstParameterBlock>(model);
}

std::size_t parameter_count(const BiProjectorModel& model) {
    std::size_t n = 0;
    for (const auto& b : parameter_blocks(model)) n += b.values.size();
    return n;
}

BiProjectorModel init(const ModelSpec& spec, const Rng& rng) {
    spec.validate();
    MlpSpec head = spec.projector;
    head.final_normalize = true;
    BiProjectorModel m{init_mlp(spec.encoder, rng.fork("encoder")), init_mlp(head, rng.fork("projector1")),
                       init_mlp(head, rng.fork("projector2"))};
    return m;
}

double GradientTape::min_abs_relu_preactivation(const BiProjectorModel& model) const {
    double best = std::numeric_limits<double>::infinity();
    auto scan = [&](const Mlp& mlp, const MlpTrace& t) {
        if (mlp.spec.activation != Activation::ReLU) return;
        for (std::size_t l = 0; l + 1 < t.preactivations.size(); ++l) {
            for (double z : t.preactivations[l]) best = std::min(best, std::abs(z));
        }
    };
    for (const auto& s : samples) {
        scan(model.encoder, s.encoder);
        scan(model.projector1, s.head1);
        scan(model.projector2, s.head2);
    }
    return best;
}

ForwardResult forward(const BiProjectorModel& model, std::span<const Vector> inputs, std::size_t first_sample_id) {
    ForwardResult r;
    r.features.reserve(inputs.size());
    r.h1.reserve(inputs.size());
    r.h2.reserve(inputs.size());
    r.tape.samples.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        SampleTrace s;
        s.encoder = run_mlp(model.encoder, inputs[i]);
        s.head1 = run_mlp(model.projector1, s.encoder.output);
        s.head2 = run_mlp(model.projector2, s.encoder.output);
        r.features.push_back(s.encoder.output);
        r.h1.push_back({s.head1.output, 1, first_sample_id + i});
        r.h2.push_back({s.head2.output, 2, first_sample_id + i});
        r.tape.samples.push_back(std::move(s));
    }
    return r;
}

ForwardResult forward(const BiProjectorModel& model, const Vector& x) {
    return forward(model, std::span<const Vector>(&x, 1));
}

Vector mlp_apply(const Mlp& mlp, const Vector& x) { return run_mlp(mlp, x).output; }

void backward_into(const BiProjectorModel& model, const GradientTape& tape, std::span<const Vector> d_h1,
                   std::span<const Vector> d_h2, ParameterGradients& grads) {
    const std::size_t n = tape.samples.size();
    if ((!d_h1.empty() && d_h1.size() != n) || (!d_h2.empty() && d_h2.size() != n)) {
        throw DimensionError("backward: " + std::to_string(n) + " recorded samples but gradients for " +
                             std::to_string(d_h1.size()) + "/" + std::to_string(d_h2.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const SampleTrace& s = tape.samples[i];
        Vector d_features(model.encoder.spec.output_dim());
        bool touched = false;
        if (!d_h1.empty()) {
            if (d_h1[i].dim() != s.head1.output.dim()) throw DimensionError("backward: head-1 gradient shape mismatch");
            d_features += backprop_mlp(model.projector1, s.head1, d_h1[i], grads.projector1);
            touched = true;
        }
        if (!d_h2.empty()) {
            if (d_h2[i].dim() != s.head2.output.dim()) throw DimensionError("backward: head-2 gradient shape mismatch");
            d_features += backprop_mlp(model.projector2, s.head2, d_h2[i], grads.projector2);
            touched = true;
        }
        if (touched) backprop_mlp(model.encoder, s.encoder, d_features, grads.encoder);
    }
}

ParameterGradients backward(const BiProjectorModel& model, const GradientTape& tape, std::span<const Vector> d_h1,
                            std::span<const Vector> d_h2) {
    ParameterGradients g = zeros_like(model);
    backward_into(model, tape, d_h1, d_h2, g);
    return g;
}

std::string_view to_string(Representation r) noexcept {
    switch (r) {
    case Representation::Encoder: return "encoder";
    case Representation::Projector1: return "projector1";
    case Representation::Projector2: return "projector2";
    }
    return "unknown";
}

Representation parse_representation(std::string_view name) {
    for (auto r : {Representation::Encoder, Representation::Projector1, Representation::Projector2}) {
        if (to_string(r) == name) return r;
    }
    throw ConfigError("unknown representation layer '" + std::string(name) +
                      "' (expected encoder, projector1 or projector2)");
}

std::vector<Vector> embed(const BiProjectorModel& model, const Matrix& points, Representation layer) {
    std::vector<Vector> out;
    out.reserve(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const Vector features = mlp_apply(model.encoder, points.row_vector(i));
        switch (layer) {
        case Representation::Encoder: out.push_back(features); break;
        case Representation::Projector1: out.push_back(mlp_apply(model.projector1, features)); break;
        case Representation::Projector2: out.push_back(mlp_apply(model.projector2, features)); break;
        }
    }
    return out;
}

} // namespace contrastive
