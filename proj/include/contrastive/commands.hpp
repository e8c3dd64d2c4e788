#pragma once

// Subcommands of the `ssl` runner. Each returns a process exit code:
// 0 success, 1 property or experiment failure, 2 usage or config error.

#include "contrastive/config.hpp"
#include "contrastive/eval.hpp"
#include "contrastive/train.hpp"
#include "contrastive/verify.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace contrastive {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Command-line settings applied on top of a loaded config.
struct ConfigOverrides {
    /// Forces loss.mixed_head_negatives on.
    bool mixed_head_negatives = false;
};

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides);

struct RunOutcome {
    TrainState state;
    EvalReport knn;
    EvalReport linear;
};

/// Trains (or resumes) and writes the metrics JSONL, checkpoints and the
/// summary JSON under `config.output.dir`. Progress lines go to `log`.
RunOutcome run_experiment(const ExperimentConfig& config, std::ostream& log,
                          const std::optional<std::filesystem::path>& resume = std::nullopt);

nlohmann::ordered_json summary_json(const ExperimentConfig& config, const RunOutcome& outcome);

int cmd_train(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& resume,
              const ConfigOverrides& overrides, std::ostream& out, std::ostream& err);

/// Both configs must share dataset and eval sections. Writes
/// `method,knn_accuracy,linear_accuracy` with one row per config.
int cmd_compare(const std::filesystem::path& config_a, const std::filesystem::path& config_b,
                const std::filesystem::path& out_csv, const ConfigOverrides& overrides, std::ostream& out,
                std::ostream& err);

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

/// `dataset` is a CSV path, a JSON file holding a dataset (or experiment)
/// config, or that JSON inline. Writes encoder and both projector outputs,
/// each group L2-normalized, followed by the label.
int cmd_embed(const std::filesystem::path& checkpoint, const std::string& dataset,
              const std::filesystem::path& out_csv, std::ostream& out, std::ostream& err);

/// Loads the dataset argument accepted by cmd_embed.
Dataset resolve_dataset(const std::string& spec);

} // namespace contrastive
