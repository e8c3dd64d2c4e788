#include "contrastive/train.hpp"

#include "contrastive/data.hpp"
#include "contrastive/eval.hpp"
#include "contrastive/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace contrastive {

namespace {

std::vector<Vector> rows_of(const Matrix& m) {
    std::vector<Vector> out;
    out.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(m.row_vector(r));
    return out;
}

std::vector<Vector> vectors_of(const std::vector<Embedding>& e) {
    std::vector<Vector> out;
    out.reserve(e.size());
    for (const auto& x : e) out.push_back(x.vector);
    return out;
}

const std::vector<Vector>& pick(const ForwardResult& f, const std::vector<Vector>& h1,
                                const std::vector<Vector>& h2, Representation layer) {
    switch (layer) {
    case Representation::Projector1: return h1;
    case Representation::Projector2: return h2;
    case Representation::Encoder: break;
    }
    return f.features;
}

// Loss over one batch; fills the parameter gradients.
double batch_step(const ExperimentConfig& config, const BiProjectorModel& model, const ContrastiveBatch& batch,
                  bool head2, ParameterGradients& grads) {
    const std::size_t b = batch.anchors.size();
    std::vector<Vector> inputs = batch.anchors;
    inputs.insert(inputs.end(), batch.positives.begin(), batch.positives.end());
    const ForwardResult fwd = forward(model, inputs);

    BatchEmbeddings emb;
    for (std::size_t i = 0; i < b; ++i) {
        emb.anchor1.push_back(fwd.h1[i].vector);
        emb.positive1.push_back(fwd.h1[b + i].vector);
        if (head2) {
            emb.anchor2.push_back(fwd.h2[i].vector);
            emb.positive2.push_back(fwd.h2[b + i].vector);
        }
    }
    const BatchLossOutput out = batch_loss(config.loss, emb);

    std::vector<Vector> d1 = out.grad.anchor1;
    d1.insert(d1.end(), out.grad.positive1.begin(), out.grad.positive1.end());
    std::vector<Vector> d2;
    if (head2) {
        d2 = out.grad.anchor2;
        d2.insert(d2.end(), out.grad.positive2.begin(), out.grad.positive2.end());
    }
    grads = backward(model, fwd.tape, d1, d2);
    return out.value;
}

} // namespace

TrainingAborted::TrainingAborted(std::size_t epoch, std::size_t batch, const std::string& what)
    : NumericalError("training aborted at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                     ": " + what),
      epoch_(epoch),
      batch_(batch) {}

double collapse_monitor(std::span<const Vector> embeddings) {
    if (embeddings.size() < 2) throw DomainError("collapse_monitor: need at least 2 embeddings");
    const std::size_t d = embeddings.front().dim();
    Vector mean(d);
    for (const auto& e : embeddings) {
        if (e.dim() != d) throw DimensionError("collapse_monitor: embeddings differ in dimension");
        mean += e;
    }
    const double n = static_cast<double>(embeddings.size());
    mean *= 1.0 / n;
    double total = 0.0;
    for (const auto& e : embeddings) total += sq_euclid(e, mean);
    return total / (n * static_cast<double>(d));
}

double collapse_monitor(std::span<const Embedding> embeddings) {
    std::vector<Vector> v;
    v.reserve(embeddings.size());
    for (const auto& e : embeddings) {
        if (!embeddings.empty() && e.projector != embeddings.front().projector) {
            throw DomainError("collapse_monitor: embeddings from more than one projector");
        }
        v.push_back(e.vector);
    }
    return collapse_monitor(std::span<const Vector>(v));
}

DatasetSplit split_for(const ExperimentConfig& config, const Dataset& dataset) {
    Rng rng = Rng(config.dataset.seed).fork("split");
    return split_dataset(dataset, config.dataset.test_fraction, rng);
}

std::size_t batches_per_epoch(const ExperimentConfig& config, std::size_t n_train) {
    if (config.schedule.batches_per_epoch > 0) return config.schedule.batches_per_epoch;
    return std::max<std::size_t>(1, n_train / config.schedule.batch_size);
}

TrainState init_training(const ExperimentConfig& config) {
    config.validate();
    TrainState state;
    state.model = init(config.model, Rng(config.seed).fork("init"));
    state.optimizer.config = config.optimizer;
    return state;
}

void train_epochs(const ExperimentConfig& config, const DatasetSplit& split, TrainState& state,
                  std::size_t target_epochs, const EpochCallback& on_epoch) {
    config.validate();
    config.augmentation.validate(/*allow_identity=*/false);
    if (split.train.size() == 0 || split.test.size() == 0) throw DomainError("train: empty dataset split");
    if (split.train.dim() != state.model.input_dim()) {
        throw DimensionError("train: dataset dim " + std::to_string(split.train.dim()) + " but model input dim " +
                             std::to_string(state.model.input_dim()));
    }
    if (config.schedule.batch_size > split.train.size()) {
        throw ConfigError("schedule.batch_size " + std::to_string(config.schedule.batch_size) +
                          " exceeds the training split size " + std::to_string(split.train.size()));
    }
    const bool head2 = uses_head2(config.loss);
    const std::size_t steps = batches_per_epoch(config, split.train.size());
    const Rng batch_root = Rng(config.seed).fork("batches");
    const std::vector<Vector> test_x = rows_of(split.test.points);

    while (state.epochs_done < target_epochs) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::size_t epoch = state.epochs_done + 1;
        Rng rng = batch_root.fork(static_cast<std::uint64_t>(state.epochs_done));
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            const ContrastiveBatch batch = make_batch(rng, split.train, config.schedule.batch_size, config.augmentation);
            ParameterGradients grads;
            try {
                const double loss = batch_step(config, state.model, batch, head2, grads);
                if (!std::isfinite(loss)) throw NumericalError("non-finite loss");
                step(state.optimizer, state.model, grads);
                loss_sum += loss;
            } catch (const NumericalError& e) {
                throw TrainingAborted(epoch, s + 1, e.what());
            }
        }

        TrainRecord rec;
        rec.epoch = epoch;
        rec.loss_mean = loss_sum / static_cast<double>(steps);
        const ForwardResult test_fwd = forward(state.model, test_x);
        const std::vector<Vector> t1 = vectors_of(test_fwd.h1);
        const std::vector<Vector> t2 = vectors_of(test_fwd.h2);
        rec.projector1_variance = collapse_monitor(std::span<const Vector>(t1));
        rec.projector2_variance = collapse_monitor(std::span<const Vector>(t2));
        if (config.eval.monitor) {
            const std::vector<Vector> train_emb = embed(state.model, split.train.points, config.eval.layer);
            const auto& test_emb = pick(test_fwd, t1, t2, config.eval.layer);
            rec.knn_accuracy =
                knn_evaluate(train_emb, split.train.labels, test_emb, split.test.labels, config.eval.k).top1_accuracy;
        }
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        state.records.push_back(rec);
        state.epochs_done = epoch;
        if (on_epoch) on_epoch(state);
    }
}

TrainState train(const ExperimentConfig& config, const Dataset& dataset, const EpochCallback& on_epoch) {
    if (dataset.size() == 0) throw DomainError("train: empty dataset");
    const DatasetSplit split = split_for(config, dataset);
    TrainState state = init_training(config);
    train_epochs(config, split, state, config.schedule.epochs, on_epoch);
    return state;
}

nlohmann::ordered_json to_json(const TrainRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss_mean"] = r.loss_mean;
    j["knn_accuracy"] = r.knn_accuracy ? nlohmann::ordered_json(*r.knn_accuracy) : nlohmann::ordered_json(nullptr);
    j["projector1_variance"] = r.projector1_variance;
    j["projector2_variance"] = r.projector2_variance;
    j["wall_ms"] = r.wall_ms;
    return j;
}

TrainRecord record_from_json(const nlohmann::json& j) {
    TrainRecord r;
    r.epoch = j.at("epoch").get<std::size_t>();
    r.loss_mean = j.at("loss_mean").get<double>();
    if (!j.at("knn_accuracy").is_null()) r.knn_accuracy = j.at("knn_accuracy").get<double>();
    r.projector1_variance = j.at("projector1_variance").get<double>();
    r.projector2_variance = j.at("projector2_variance").get<double>();
    r.wall_ms = j.at("wall_ms").get<double>();
    return r;
}

std::string metrics_jsonl(std::span<const TrainRecord> records) {
    std::string out;
    for (const auto& r : records) out += to_json(r).dump() + "\n";
    return out;
}

} // namespace contrastive
