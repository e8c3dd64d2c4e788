#pragma once

// Declarative experiment description. Every field has a default; parsing is
// strict, so unknown keys and wrongly typed values are rejected before any
// computation starts.
//
// {
//   "name": "combined",            // defaults to the loss kind
//   "seed": 42,                    // master seed (init, batches); SSL_SEED overrides
//   "dataset":      {"kind": "moons", "per_class": 300, "noise_std": 0.1, "classes": 3,
//                    "dim": 2, "center_spread": 10.0, "std": 0.5, "path": "",
//                    "seed": 42, "test_fraction": 0.3},
//   "model":        {"encoder": [2, 64, 32], "projector": [32, 32, 16], "activation": "relu"},
//   "loss":         {"kind": "combined", "tau": 0.5, "alpha1": 0.3333333333333333,
//                    "alpha2": 0.3333333333333333, "margin": 0.2, "epsilon": 1e-6,
//                    "clamp_similarity": true, "mixed_head_negatives": false},
//   "augmentation": {"gaussian_noise_std": 0.05, "coordinate_dropout_prob": 0.0,
//                    "rotation_max_radians": 0.0, "scale_jitter": 0.1},
//   "optimizer":    {"kind": "adam", "learning_rate": 0.001, "momentum": 0.9,
//                    "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
//   "schedule":     {"epochs": 200, "batch_size": 64, "batches_per_epoch": 0},
//   "eval":         {"k": 5, "layer": "encoder", "monitor": true,
//                    "probe_epochs": 500, "probe_lr": 0.1},
//   "output":       {"dir": "runs/default", "metrics": "metrics.jsonl",
//                    "checkpoint": "checkpoint.json", "summary": "summary.json",
//                    "checkpoint_every": 0}
// }

#include "contrastive/data.hpp"
#include "contrastive/losses.hpp"
#include "contrastive/model.hpp"
#include "contrastive/optimizer.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace contrastive {

struct DatasetConfig {
    std::string kind = "moons"; // blobs | moons | circles | csv
    std::size_t per_class = 300;
    double noise_std = 0.1;     // moons, circles
    std::size_t classes = 3;    // blobs
    std::size_t dim = 2;        // blobs
    double center_spread = 10.0;
    double std = 0.5;
    std::string path;           // csv
    std::uint64_t seed = 42;
    double test_fraction = 0.3;
};

struct ScheduleConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    /// 0 means floor(n_train / batch_size), at least 1.
    std::size_t batches_per_epoch = 0;
};

struct EvalConfig {
    std::size_t k = 5;
    Representation layer = Representation::Encoder;
    bool monitor = true;
    std::size_t probe_epochs = 500;
    double probe_lr = 0.1;
};

struct OutputConfig {
    std::string dir = "runs/default";
    std::string metrics = "metrics.jsonl";
    std::string checkpoint = "checkpoint.json";
    std::string summary = "summary.json";
    /// Also checkpoint every N epochs (0 = final only). A `{epoch}` token in
    /// the checkpoint name is replaced by the epoch number.
    std::size_t checkpoint_every = 0;

    std::filesystem::path metrics_path() const { return std::filesystem::path(dir) / metrics; }
    std::filesystem::path summary_path() const { return std::filesystem::path(dir) / summary; }
    std::filesystem::path checkpoint_path(std::size_t epoch) const;
    std::filesystem::path final_checkpoint_path() const;
};

struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 42;
    DatasetConfig dataset;
    ModelSpec model;
    LossSpec loss;
    AugmentationSpec augmentation;
    OptimizerConfig optimizer;
    ScheduleConfig schedule;
    EvalConfig eval;
    OutputConfig output;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Parses and validates. `source` prefixes every diagnostic, e.g.
/// "run.json:3:12: ..." for syntax errors or "run.json: field 'loss.tau': ...".
ExperimentConfig parse_config(std::string_view json_text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// A bare dataset object, or a full experiment config whose dataset section
/// is used.
DatasetConfig parse_dataset_config(std::string_view json_text, std::string_view source = "<dataset>");

/// Applies SSL_SEED from the environment to the master seed, if set.
void apply_env_overrides(ExperimentConfig& config);

nlohmann::ordered_json to_json(const ExperimentConfig& config);
nlohmann::ordered_json to_json(const DatasetConfig& config);
nlohmann::ordered_json to_json(const EvalConfig& config);

Dataset build_dataset(const DatasetConfig& config);

} // namespace contrastive
