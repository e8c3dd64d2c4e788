#pragma once

// JSON checkpoints holding everything needed to resume training exactly:
// parameters, optimizer moments, completed epochs, past records and the
// experiment config. Doubles are written in shortest round-trip form, so a
// save/load cycle is lossless.

#include "contrastive/config.hpp"
#include "contrastive/train.hpp"

#include "json.hpp"

#include <filesystem>

namespace contrastive {

struct Checkpoint {
    ExperimentConfig config;
    TrainState state;
};

nlohmann::ordered_json to_json(const BiProjectorModel& model);
/// Throws ConfigError if shapes are inconsistent with the stored specs.
BiProjectorModel model_from_json(const nlohmann::json& j);

nlohmann::ordered_json checkpoint_json(const ExperimentConfig& config, const TrainState& state);
Checkpoint checkpoint_from_json(const nlohmann::json& j, const std::string& source = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config, const TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace contrastive
