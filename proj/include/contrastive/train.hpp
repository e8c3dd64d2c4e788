#pragma once

// Optimization loop with per-epoch frozen-model monitoring.
//
// Randomness is derived from the master seed so that any epoch can be
// replayed from its index alone: parameters come from fork("init") and the
// batches of epoch e from fork("batches").fork(e). Resuming from a
// checkpoint therefore reproduces an uninterrupted run bit for bit.

#include "contrastive/config.hpp"
#include "contrastive/error.hpp"
#include "contrastive/model.hpp"
#include "contrastive/optimizer.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace contrastive {

struct TrainRecord {
    std::size_t epoch = 0; // 1-based
    double loss_mean = 0.0;
    std::optional<double> knn_accuracy; // only when monitoring is enabled
    double projector1_variance = 0.0;
    double projector2_variance = 0.0;
    double wall_ms = 0.0;

    friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

struct TrainState {
    BiProjectorModel model;
    OptimizerState optimizer;
    std::size_t epochs_done = 0;
    std::vector<TrainRecord> records;
};

/// Non-finite loss or gradient during training.
class TrainingAborted : public NumericalError {
public:
    TrainingAborted(std::size_t epoch, std::size_t batch, const std::string& what);

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

/// Mean per-coordinate population variance of an embedding cloud.
/// Throws DomainError for fewer than two embeddings.
double collapse_monitor(std::span<const Embedding> embeddings);
double collapse_monitor(std::span<const Vector> embeddings);

/// Train/test split used for monitoring, drawn from the dataset seed.
DatasetSplit split_for(const ExperimentConfig& config, const Dataset& dataset);

std::size_t batches_per_epoch(const ExperimentConfig& config, std::size_t n_train);

TrainState init_training(const ExperimentConfig& config);

using EpochCallback = std::function<void(const TrainState&)>;

/// Runs epochs until `state.epochs_done == target_epochs`, invoking
/// `on_epoch` after each one.
void train_epochs(const ExperimentConfig& config, const DatasetSplit& split, TrainState& state,
                  std::size_t target_epochs, const EpochCallback& on_epoch = {});

/// Fresh run over `config.schedule.epochs` epochs.
TrainState train(const ExperimentConfig& config, const Dataset& dataset, const EpochCallback& on_epoch = {});

nlohmann::ordered_json to_json(const TrainRecord& record);
TrainRecord record_from_json(const nlohmann::json& j);
/// One JSON object per line, LF-terminated.
std::string metrics_jsonl(std::span<const TrainRecord> records);

} // namespace contrastive
