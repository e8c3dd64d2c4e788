#include "contrastive/checkpoint.hpp"

#include "contrastive/error.hpp"
#include "contrastive/io.hpp"

namespace contrastive {

namespace {

constexpr const char* kFormat = "contrastive-checkpoint-v1";

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

ojson mlp_json(const Mlp& mlp) {
    ojson j;
    j["widths"] = mlp.spec.layer_widths;
    j["activation"] = std::string(to_string(mlp.spec.activation));
    j["normalize"] = mlp.spec.final_normalize;
    ojson layers = ojson::array();
    for (const auto& l : mlp.layers) layers.push_back({{"weight", l.weight.values()}, {"bias", l.bias.values()}});
    j["layers"] = std::move(layers);
    return j;
}

Mlp mlp_from_json(const json& j, const std::string& name) {
    Mlp mlp;
    mlp.spec.layer_widths = j.at("widths").get<std::vector<std::size_t>>();
    mlp.spec.activation = parse_activation(j.at("activation").get<std::string>());
    mlp.spec.final_normalize = j.at("normalize").get<bool>();
    mlp.spec.validate();
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != mlp.spec.layer_widths.size()) {
        throw ConfigError("checkpoint: " + name + " has " + std::to_string(layers.size()) + " layers for " +
                          std::to_string(mlp.spec.layer_widths.size()) + " widths");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::size_t in = mlp.spec.layer_widths[i];
        const std::size_t out = mlp.spec.layer_widths[i + 1];
        auto w = layers[i].at("weight").get<std::vector<double>>();
        auto b = layers[i].at("bias").get<std::vector<double>>();
        if (w.size() != in * out || b.size() != out) {
            throw ConfigError("checkpoint: " + name + "." + std::to_string(i) + " shape does not match its widths");
        }
        mlp.layers.push_back({Matrix(out, in, std::move(w)), Vector(std::move(b))});
    }
    return mlp;
}

} // namespace

ojson to_json(const BiProjectorModel& model) {
    ojson j;
    j["encoder"] = mlp_json(model.encoder);
    j["projector1"] = mlp_json(model.projector1);
    j["projector2"] = mlp_json(model.projector2);
    return j;
}

BiProjectorModel model_from_json(const json& j) {
    BiProjectorModel m;
    m.encoder = mlp_from_json(j.at("encoder"), "encoder");
    m.projector1 = mlp_from_json(j.at("projector1"), "projector1");
    m.projector2 = mlp_from_json(j.at("projector2"), "projector2");
    try {
        m.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
    return m;
}

ojson checkpoint_json(const ExperimentConfig& config, const TrainState& state) {
    ojson j;
    j["format"] = kFormat;
    j["epochs_done"] = state.epochs_done;
    j["config"] = to_json(config);
    j["model"] = to_json(state.model);
    j["optimizer"] = {{"steps", state.optimizer.steps},
                      {"first", state.optimizer.first},
                      {"second", state.optimizer.second}};
    ojson records = ojson::array();
    for (const auto& r : state.records) records.push_back(to_json(r));
    j["records"] = std::move(records);
    return j;
}

Checkpoint checkpoint_from_json(const json& j, const std::string& source) {
    try {
        if (j.value("format", std::string()) != kFormat) {
            throw ConfigError(source + ": not a checkpoint (missing or unknown format tag)");
        }
        Checkpoint c;
        c.config = parse_config(j.at("config").dump(), source + " (config)");
        c.state.model = model_from_json(j.at("model"));
        c.state.epochs_done = j.at("epochs_done").get<std::size_t>();
        c.state.optimizer.config = c.config.optimizer;
        c.state.optimizer.steps = j.at("optimizer").at("steps").get<std::uint64_t>();
        c.state.optimizer.first = j.at("optimizer").at("first").get<std::vector<std::vector<double>>>();
        c.state.optimizer.second = j.at("optimizer").at("second").get<std::vector<std::vector<double>>>();
        for (const auto& r : j.at("records")) c.state.records.push_back(record_from_json(r));
        if (c.state.records.size() != c.state.epochs_done) {
            throw ConfigError(source + ": record count does not match epochs_done");
        }
        if (!(c.config.model.encoder == c.state.model.encoder.spec) ||
            !(c.config.model.projector == c.state.model.projector1.spec)) {
            throw ConfigError(source + ": stored config and model shapes disagree");
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(source + ": malformed checkpoint: " + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config, const TrainState& state) {
    write_file_atomic(path, checkpoint_json(config, state).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": checkpoint is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j, path.string());
}

} // namespace contrastive
