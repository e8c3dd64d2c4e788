#include "contrastive/commands.hpp"

#include "contrastive/checkpoint.hpp"
#include "contrastive/data.hpp"
#include "contrastive/error.hpp"
#include "contrastive/io.hpp"

#include <cstdio>

namespace contrastive {

namespace {

std::vector<Vector> rows_of(const Matrix& m) {
    std::vector<Vector> out;
    for (std::size_t r = 0; r < m.rows(); ++r) out.push_back(m.row_vector(r));
    return out;
}

// Everything except the schedule length and output locations must match for
// a resumed run to continue the same trajectory.
void check_resumable(const ExperimentConfig& stored, const ExperimentConfig& config, const std::string& source) {
    auto strip = [](const ExperimentConfig& c) {
        auto j = to_json(c);
        j.erase("output");
        j["schedule"].erase("epochs");
        return j;
    };
    const auto a = strip(stored);
    const auto b = strip(config);
    for (const auto& [key, value] : a.items()) {
        if (b.at(key) != value) {
            throw ConfigError(source + ": cannot resume, section '" + key + "' differs from the config");
        }
    }
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const TrainingAborted& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

ExperimentConfig load_with_env(const std::filesystem::path& path, const ConfigOverrides& overrides) {
    ExperimentConfig c = load_config(path);
    apply_env_overrides(c);
    apply_overrides(c, overrides);
    return c;
}

} // namespace

void apply_overrides(ExperimentConfig& config, const ConfigOverrides& overrides) {
    if (overrides.mixed_head_negatives) config.loss.mixed_head_negatives = true;
}

RunOutcome run_experiment(const ExperimentConfig& config, std::ostream& log,
                          const std::optional<std::filesystem::path>& resume) {
    config.validate();
    const Dataset dataset = build_dataset(config.dataset);
    const DatasetSplit split = split_for(config, dataset);

    RunOutcome outcome;
    if (resume) {
        Checkpoint ck = load_checkpoint(*resume);
        check_resumable(ck.config, config, resume->string());
        outcome.state = std::move(ck.state);
        log << "resuming " << config.name << " from epoch " << outcome.state.epochs_done << "\n";
    } else {
        outcome.state = init_training(config);
    }

    const auto& out = config.output;
    auto on_epoch = [&](const TrainState& s) {
        write_file_atomic(out.metrics_path(), metrics_jsonl(s.records));
        if (out.checkpoint_every > 0 && s.epochs_done % out.checkpoint_every == 0) {
            save_checkpoint(out.checkpoint_path(s.epochs_done), config, s);
        }
        const TrainRecord& r = s.records.back();
        char line[160];
        std::snprintf(line, sizeof line, "[%s] epoch %zu/%zu loss %.6f", config.name.c_str(), r.epoch,
                      config.schedule.epochs, r.loss_mean);
        log << line;
        if (r.knn_accuracy) {
            std::snprintf(line, sizeof line, " knn %.4f", *r.knn_accuracy);
            log << line;
        }
        log << "\n";
    };

    try {
        train_epochs(config, split, outcome.state, config.schedule.epochs, on_epoch);
    } catch (const TrainingAborted&) {
        write_file_atomic(out.metrics_path(), metrics_jsonl(outcome.state.records));
        throw;
    }
    // Resuming a finished run, or epochs = 0, still leaves a metrics file.
    write_file_atomic(out.metrics_path(), metrics_jsonl(outcome.state.records));
    save_checkpoint(out.final_checkpoint_path(), config, outcome.state);

    const auto train_emb = embed(outcome.state.model, split.train.points, config.eval.layer);
    const auto test_emb = embed(outcome.state.model, split.test.points, config.eval.layer);
    outcome.knn = knn_evaluate(train_emb, split.train.labels, test_emb, split.test.labels, config.eval.k);
    outcome.linear = linear_probe(train_emb, split.train.labels, test_emb, split.test.labels, config.eval.probe_epochs,
                                  config.eval.probe_lr);
    write_file_atomic(out.summary_path(), summary_json(config, outcome).dump(2) + "\n");
    return outcome;
}

nlohmann::ordered_json summary_json(const ExperimentConfig& config, const RunOutcome& outcome) {
    nlohmann::ordered_json j;
    j["name"] = config.name;
    j["loss"] = std::string(to_string(config.loss.kind));
    j["seed"] = config.seed;
    j["epochs"] = outcome.state.epochs_done;
    j["final_loss"] = outcome.state.records.empty() ? nlohmann::ordered_json(nullptr)
                                                    : nlohmann::ordered_json(outcome.state.records.back().loss_mean);
    j["layer"] = std::string(to_string(config.eval.layer));
    j["knn"] = to_json(outcome.knn);
    j["linear"] = to_json(outcome.linear);
    j["metrics"] = config.output.metrics_path().string();
    j["checkpoint"] = config.output.final_checkpoint_path().string();
    return j;
}

int cmd_train(const std::filesystem::path& config_path, const std::optional<std::filesystem::path>& resume,
              const ConfigOverrides& overrides, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig config = load_with_env(config_path, overrides);
        const RunOutcome r = run_experiment(config, out, resume);
        char line[160];
        std::snprintf(line, sizeof line, "%s: knn %.4f linear %.4f\n", config.name.c_str(), r.knn.top1_accuracy,
                      r.linear.top1_accuracy);
        out << line << "summary: " << config.output.summary_path().string() << "\n";
        return kExitOk;
    });
}

int cmd_compare(const std::filesystem::path& config_a, const std::filesystem::path& config_b,
                const std::filesystem::path& out_csv, const ConfigOverrides& overrides, std::ostream& out,
                std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig a = load_with_env(config_a, overrides);
        const ExperimentConfig b = load_with_env(config_b, overrides);
        if (to_json(a.dataset) != to_json(b.dataset)) {
            throw ConfigError("compare: '" + config_a.string() + "' and '" + config_b.string() +
                              "' use different dataset sections");
        }
        if (to_json(a.eval) != to_json(b.eval)) {
            throw ConfigError("compare: '" + config_a.string() + "' and '" + config_b.string() +
                              "' use different eval sections");
        }
        if (a.output.dir == b.output.dir && to_json(a) != to_json(b)) {
            throw ConfigError("compare: both configs write to output.dir '" + a.output.dir + "'");
        }
        std::string csv = "method,knn_accuracy,linear_accuracy\n";
        for (const ExperimentConfig* c : {&a, &b}) {
            const RunOutcome r = run_experiment(*c, out);
            csv += c->name + "," + format_double(r.knn.top1_accuracy) + "," + format_double(r.linear.top1_accuracy) +
                   "\n";
        }
        write_file_atomic(out_csv, csv);
        out << csv;
        return kExitOk;
    });
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto results = run_all_properties(options);
        print_report(out, results);
        int code = kExitOk;
        for (const auto& r : results) {
            if (r.passed()) continue;
            err << "property failed: " << r.name << "\n";
            code = kExitFailure;
        }
        return code;
    });
}

Dataset resolve_dataset(const std::string& spec) {
    const std::filesystem::path path(spec);
    if (path.extension() == ".csv") {
        if (!std::filesystem::exists(path)) throw ConfigError("dataset not found: " + spec);
        return read_csv(path);
    }
    if (!spec.empty() && spec.front() == '{') return build_dataset(parse_dataset_config(spec, "--dataset"));
    if (!std::filesystem::exists(path)) throw ConfigError("dataset not found: " + spec);
    return build_dataset(parse_dataset_config(read_file(path), spec));
}

int cmd_embed(const std::filesystem::path& checkpoint, const std::string& dataset,
              const std::filesystem::path& out_csv, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Checkpoint ck = load_checkpoint(checkpoint);
        const Dataset ds = resolve_dataset(dataset);
        const BiProjectorModel& model = ck.state.model;
        if (ds.dim() != model.input_dim()) {
            throw ConfigError("embed: dataset has dim " + std::to_string(ds.dim()) + " but the checkpoint expects " +
                              std::to_string(model.input_dim()));
        }
        const ForwardResult f = forward(model, rows_of(ds.points));

        std::string csv;
        const std::pair<const char*, std::size_t> groups[] = {{"encoder", model.encoder.spec.output_dim()},
                                                              {"projector1", model.projector1.spec.output_dim()},
                                                              {"projector2", model.projector2.spec.output_dim()}};
        for (const auto& [name, width] : groups) {
            for (std::size_t k = 0; k < width; ++k) csv += std::string(name) + "_" + std::to_string(k) + ",";
        }
        csv += "label\n";
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (norm(f.features[i]) == 0.0) {
                throw NumericalError("embed: row " + std::to_string(i) + " has an all-zero encoder output");
            }
            const Vector feature = l2_normalize(f.features[i]);
            for (const Vector* v : {&feature, &f.h1[i].vector, &f.h2[i].vector}) {
                for (double x : *v) csv += format_double(x) + ",";
            }
            csv += std::to_string(ds.labels[i]) + "\n";
        }
        write_file_atomic(out_csv, csv);
        out << "wrote " << ds.size() << " rows to " << out_csv.string() << "\n";
        return kExitOk;
    });
}

} // namespace contrastive
