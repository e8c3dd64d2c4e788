#pragma once

// Shared MLP encoder feeding two disjoint MLP projector heads whose outputs
// are L2-normalized. Forward passes record a tape; backward replays it and
// accumulates parameter gradients for all three networks.

#include "contrastive/numerics.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace contrastive {

enum class Activation { ReLU, Tanh };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

struct MlpSpec {
    /// Input width first, output width last. Activations sit between layers;
    /// the last affine layer is linear.
    std::vector<std::size_t> layer_widths;
    Activation activation = Activation::ReLU;
    bool final_normalize = false;

    std::size_t input_dim() const { return layer_widths.front(); }
    std::size_t output_dim() const { return layer_widths.back(); }
    void validate() const;

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct DenseLayer {
    Matrix weight; // out x in
    Vector bias;   // out
};

struct Mlp {
    MlpSpec spec;
    std::vector<DenseLayer> layers;
};

struct ModelSpec {
    MlpSpec encoder{{2, 64, 32}, Activation::ReLU, false};
    /// Shape shared by both heads; final_normalize is forced on.
    MlpSpec projector{{32, 32, 16}, Activation::ReLU, true};

    void validate() const;
};

struct BiProjectorModel {
    Mlp encoder;
    Mlp projector1;
    Mlp projector2;

    std::size_t input_dim() const { return encoder.spec.input_dim(); }
    void validate() const;
};

/// Gradients share the parameter layout of the model they belong to.
using ParameterGradients = BiProjectorModel;

BiProjectorModel zeros_like(const BiProjectorModel& model);

/// A named, flat view of one parameter array.
struct ParameterBlock {
    std::string name;
    std::span<double> values;
};

struct ConstParameterBlock {
    std::string name;
    std::span<const double> values;
};

/// Blocks in a fixed order: encoder, projector1, projector2; per layer
/// weight then bias.
std::vector<ParameterBlock> parameter_blocks(BiProjectorModel& model);
std::vector<ConstParameterBlock> parameter_blocks(const BiProjectorModel& model);
std::size_t parameter_count(const BiProjectorModel& model);

/// Weights ~ N(0, 2 / fan_in), biases zero. The encoder and each projector
/// draw from their own named substream of `rng`.
BiProjectorModel init(const ModelSpec& spec, const Rng& rng);

struct Embedding {
    Vector vector;
    int projector = 1;
    std::size_t sample = 0;
};

/// Activations recorded for one MLP evaluation.
struct MlpTrace {
    std::vector<Vector> inputs;         // input of each layer
    std::vector<Vector> preactivations; // W a + b of each layer
    Vector output;                      // final (normalized if requested)
    double output_norm = 1.0;           // norm before normalization
};

struct SampleTrace {
    MlpTrace encoder;
    MlpTrace head1;
    MlpTrace head2;
};

struct GradientTape {
    std::vector<SampleTrace> samples;

    /// Smallest |pre-activation| over hidden ReLU units; gradient checks use
    /// it to stay away from kinks.
    double min_abs_relu_preactivation(const BiProjectorModel& model) const;
};

struct ForwardResult {
    std::vector<Vector> features; // encoder outputs
    std::vector<Embedding> h1;
    std::vector<Embedding> h2;
    GradientTape tape;
};

/// Evaluates a batch of inputs. Encoder activations are computed once per
/// sample and shared by both heads.
ForwardResult forward(const BiProjectorModel& model, std::span<const Vector> inputs,
                      std::size_t first_sample_id = 0);
ForwardResult forward(const BiProjectorModel& model, const Vector& x);

/// Output of one MLP without recording (used for evaluation).
Vector mlp_apply(const Mlp& mlp, const Vector& x);

/// Replays the tape. `d_h1` and `d_h2` hold dLoss/dEmbedding per sample; an
/// empty span means that head received no gradient and its parameter
/// gradients stay exactly zero.
ParameterGradients backward(const BiProjectorModel& model, const GradientTape& tape,
                            std::span<const Vector> d_h1, std::span<const Vector> d_h2);

/// Adds the result of backward into an existing accumulator.
void backward_into(const BiProjectorModel& model, const GradientTape& tape, std::span<const Vector> d_h1,
                   std::span<const Vector> d_h2, ParameterGradients& grads);

enum class Representation { Encoder, Projector1, Projector2 };

std::string_view to_string(Representation r) noexcept;
Representation parse_representation(std::string_view name);

/// Representation of every row of `points` at the requested layer.
std::vector<Vector> embed(const BiProjectorModel& model, const Matrix& points, Representation layer);

} // namespace contrastive
