#include "contrastive/config.hpp"

#include "contrastive/error.hpp"
#include "contrastive/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <set>

namespace contrastive {

namespace {

using json = nlohmann::json;

// Reads fields of one JSON object, remembering which keys were consumed so
// leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& object, std::string path, std::string_view source)
        : object_(object), path_(std::move(path)), source_(source) {
        if (!object_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected a JSON object");
    }

    void read(const char* key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) fail(field(key), "expected a number");
            out = v->get<double>();
        }
    }

    void read(const char* key, std::size_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) fail(field(key), "expected a non-negative integer");
            out = v->get<std::size_t>();
        }
    }

    void read(const char* key, std::uint64_t& out, bool /*u64*/) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) fail(field(key), "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void read(const char* key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) fail(field(key), "expected true or false");
            out = v->get<bool>();
        }
    }

    void read(const char* key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) fail(field(key), "expected a string");
            out = v->get<std::string>();
        }
    }

    void read(const char* key, std::vector<std::size_t>& out) {
        if (const json* v = find(key)) {
            if (!v->is_array()) fail(field(key), "expected an array of positive integers");
            std::vector<std::size_t> widths;
            for (const auto& w : *v) {
                if (!w.is_number_unsigned() || w.get<std::size_t>() == 0) {
                    fail(field(key), "expected an array of positive integers");
                }
                widths.push_back(w.get<std::size_t>());
            }
            out = std::move(widths);
        }
    }

    template <typename Parse>
    void read_enum(const char* key, Parse&& parse) {
        std::string name;
        if (find(key) == nullptr) return;
        read(key, name);
        try {
            parse(name);
        } catch (const ConfigError& e) {
            fail(field(key), e.what());
        }
    }

    const json* section(const char* key) { return find(key); }

    /// Throws on the first key that no read() call consumed.
    void finish() const {
        for (const auto& [key, value] : object_.items()) {
            if (!consumed_.count(key)) fail(field(key.c_str()), "unknown key");
        }
    }

    [[noreturn]] void fail(const std::string& where, const std::string& what) const {
        throw ConfigError(std::string(source_) + ": field '" + where + "': " + what);
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json* find(const char* key) {
        consumed_.insert(key);
        const auto it = object_.find(key);
        return it == object_.end() ? nullptr : &*it;
    }

    const json& object_;
    std::string path_;
    std::string_view source_;
    std::set<std::string> consumed_;
};

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < std::min(byte > 0 ? byte - 1 : 0, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

json parse_json(std::string_view text, std::string_view source) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte);
        throw ConfigError(std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": JSON syntax error: " + e.what());
    }
}

void read_dataset(const json& j, const std::string& path, std::string_view source, DatasetConfig& d) {
    ObjectReader r(j, path, source);
    r.read("kind", d.kind);
    r.read("per_class", d.per_class);
    r.read("noise_std", d.noise_std);
    r.read("classes", d.classes);
    r.read("dim", d.dim);
    r.read("center_spread", d.center_spread);
    r.read("std", d.std);
    r.read("path", d.path);
    r.read("seed", d.seed, true);
    r.read("test_fraction", d.test_fraction);
    r.finish();
}

void require(bool ok, std::string_view source, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(std::string(source) + ": field '" + field + "': " + what);
}

void validate_dataset(const DatasetConfig& d, std::string_view src) {
    require(d.kind == "blobs" || d.kind == "moons" || d.kind == "circles" || d.kind == "csv", src, "dataset.kind",
            "expected blobs, moons, circles or csv");
    require(d.kind != "csv" || !d.path.empty(), src, "dataset.path", "required for csv datasets");
    require(d.per_class > 0, src, "dataset.per_class", "must be positive");
    require(d.classes > 0, src, "dataset.classes", "must be positive");
    require(d.dim > 0, src, "dataset.dim", "must be positive");
    require(d.noise_std >= 0.0, src, "dataset.noise_std", "must be >= 0");
    require(d.std >= 0.0, src, "dataset.std", "must be >= 0");
    require(d.test_fraction > 0.0 && d.test_fraction < 1.0, src, "dataset.test_fraction", "must lie in (0, 1)");
}

} // namespace

std::filesystem::path OutputConfig::checkpoint_path(std::size_t epoch) const {
    std::string name = checkpoint;
    const auto pos = name.find("{epoch}");
    if (pos != std::string::npos) name.replace(pos, 7, std::to_string(epoch));
    return std::filesystem::path(dir) / name;
}

std::filesystem::path OutputConfig::final_checkpoint_path() const {
    std::string name = checkpoint;
    const auto pos = name.find("{epoch}");
    if (pos != std::string::npos) name.replace(pos, 7, "final");
    return std::filesystem::path(dir) / name;
}

void ExperimentConfig::validate() const {
    const std::string_view src = name.empty() ? std::string_view("<config>") : std::string_view(name);
    validate_dataset(dataset, src);

    try {
        model.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(src) + ": field 'model': " + e.what());
    }
    require(loss.tau > 0.0, src, "loss.tau", "must be > 0");
    require(loss.weights.alpha1 >= 0.0 && loss.weights.alpha1 <= 1.0, src, "loss.alpha1", "must lie in [0, 1]");
    require(loss.weights.alpha2 >= 0.0 && loss.weights.alpha2 <= 1.0, src, "loss.alpha2", "must lie in [0, 1]");
    require(loss.weights.alpha1 + loss.weights.alpha2 <= 1.0 + 1e-12, src, "loss.alpha2",
            "alpha1 + alpha2 must be <= 1");
    require(loss.margin >= 0.0, src, "loss.margin", "must be >= 0");
    require(loss.jaccard.epsilon >= 0.0, src, "loss.epsilon", "must be >= 0");

    try {
        augmentation.validate();
        optimizer.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(src) + ": " + e.what());
    }
    require(schedule.batch_size >= 2, src, "schedule.batch_size", "must be >= 2 (in-batch negatives)");
    require(eval.k >= 1, src, "eval.k", "must be >= 1");
    require(eval.probe_lr > 0.0, src, "eval.probe_lr", "must be > 0");
    require(!output.dir.empty(), src, "output.dir", "must not be empty");
}

ExperimentConfig parse_config(std::string_view json_text, std::string_view source) {
    const json root = parse_json(json_text, source);

    ExperimentConfig c;
    ObjectReader top(root, "", source);
    top.read("name", c.name);
    top.read("seed", c.seed, true);

    if (const json* s = top.section("dataset")) {
        read_dataset(*s, "dataset", source, c.dataset);
    }
    if (const json* s = top.section("model")) {
        ObjectReader r(*s, "model", source);
        r.read("encoder", c.model.encoder.layer_widths);
        r.read("projector", c.model.projector.layer_widths);
        r.read_enum("activation", [&](const std::string& n) {
            c.model.encoder.activation = c.model.projector.activation = parse_activation(n);
        });
        r.finish();
    }
    if (const json* s = top.section("loss")) {
        ObjectReader r(*s, "loss", source);
        auto& l = c.loss;
        r.read_enum("kind", [&](const std::string& n) { l.kind = parse_loss_kind(n); });
        r.read("tau", l.tau);
        r.read("alpha1", l.weights.alpha1);
        r.read("alpha2", l.weights.alpha2);
        r.read("margin", l.margin);
        r.read("epsilon", l.jaccard.epsilon);
        r.read("clamp_similarity", l.jaccard.clamp_similarity);
        r.read("mixed_head_negatives", l.mixed_head_negatives);
        r.finish();
    }
    if (const json* s = top.section("augmentation")) {
        ObjectReader r(*s, "augmentation", source);
        auto& a = c.augmentation;
        r.read("gaussian_noise_std", a.gaussian_noise_std);
        r.read("coordinate_dropout_prob", a.coordinate_dropout_prob);
        r.read("rotation_max_radians", a.rotation_max_radians);
        r.read("scale_jitter", a.scale_jitter);
        r.finish();
    }
    if (const json* s = top.section("optimizer")) {
        ObjectReader r(*s, "optimizer", source);
        auto& o = c.optimizer;
        r.read_enum("kind", [&](const std::string& n) { o.kind = parse_optimizer_kind(n); });
        r.read("learning_rate", o.learning_rate);
        r.read("momentum", o.momentum);
        r.read("beta1", o.beta1);
        r.read("beta2", o.beta2);
        r.read("eps", o.eps);
        r.finish();
    }
    if (const json* s = top.section("schedule")) {
        ObjectReader r(*s, "schedule", source);
        r.read("epochs", c.schedule.epochs);
        r.read("batch_size", c.schedule.batch_size);
        r.read("batches_per_epoch", c.schedule.batches_per_epoch);
        r.finish();
    }
    if (const json* s = top.section("eval")) {
        ObjectReader r(*s, "eval", source);
        auto& e = c.eval;
        r.read("k", e.k);
        r.read_enum("layer", [&](const std::string& n) { e.layer = parse_representation(n); });
        r.read("monitor", e.monitor);
        r.read("probe_epochs", e.probe_epochs);
        r.read("probe_lr", e.probe_lr);
        r.finish();
    }
    if (const json* s = top.section("output")) {
        ObjectReader r(*s, "output", source);
        auto& o = c.output;
        r.read("dir", o.dir);
        r.read("metrics", o.metrics);
        r.read("checkpoint", o.checkpoint);
        r.read("summary", o.summary);
        r.read("checkpoint_every", o.checkpoint_every);
        r.finish();
    }
    top.finish();

    c.model.projector.final_normalize = true;
    c.model.encoder.final_normalize = false;
    if (c.name.empty()) c.name = std::string(to_string(c.loss.kind));

    ExperimentConfig named = c;
    named.name = std::string(source);
    named.validate();
    return c;
}

DatasetConfig parse_dataset_config(std::string_view json_text, std::string_view source) {
    const json root = parse_json(json_text, source);
    DatasetConfig d;
    if (root.is_object() && root.contains("dataset")) return parse_config(json_text, source).dataset;
    read_dataset(root, "", source, d);
    validate_dataset(d, source);
    return d;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    return parse_config(read_file(path), path.string());
}

void apply_env_overrides(ExperimentConfig& config) {
    const char* env = std::getenv("SSL_SEED");
    if (env == nullptr || *env == '\0') return;
    const std::string_view text(env);
    std::uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError("SSL_SEED: expected a non-negative integer, got '" + std::string(text) + "'");
    }
    config.seed = seed;
}

nlohmann::ordered_json to_json(const DatasetConfig& d) {
    nlohmann::ordered_json j;
    j["kind"] = d.kind;
    j["per_class"] = d.per_class;
    j["noise_std"] = d.noise_std;
    j["classes"] = d.classes;
    j["dim"] = d.dim;
    j["center_spread"] = d.center_spread;
    j["std"] = d.std;
    j["path"] = d.path;
    j["seed"] = d.seed;
    j["test_fraction"] = d.test_fraction;
    return j;
}

nlohmann::ordered_json to_json(const EvalConfig& e) {
    nlohmann::ordered_json j;
    j["k"] = e.k;
    j["layer"] = std::string(to_string(e.layer));
    j["monitor"] = e.monitor;
    j["probe_epochs"] = e.probe_epochs;
    j["probe_lr"] = e.probe_lr;
    return j;
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["dataset"] = to_json(c.dataset);
    j["model"] = {{"encoder", c.model.encoder.layer_widths},
                  {"projector", c.model.projector.layer_widths},
                  {"activation", std::string(to_string(c.model.encoder.activation))}};
    j["loss"] = {{"kind", std::string(to_string(c.loss.kind))},
                 {"tau", c.loss.tau},
                 {"alpha1", c.loss.weights.alpha1},
                 {"alpha2", c.loss.weights.alpha2},
                 {"margin", c.loss.margin},
                 {"epsilon", c.loss.jaccard.epsilon},
                 {"clamp_similarity", c.loss.jaccard.clamp_similarity},
                 {"mixed_head_negatives", c.loss.mixed_head_negatives}};
    j["augmentation"] = {{"gaussian_noise_std", c.augmentation.gaussian_noise_std},
                         {"coordinate_dropout_prob", c.augmentation.coordinate_dropout_prob},
                         {"rotation_max_radians", c.augmentation.rotation_max_radians},
                         {"scale_jitter", c.augmentation.scale_jitter}};
    j["optimizer"] = {{"kind", std::string(to_string(c.optimizer.kind))},
                      {"learning_rate", c.optimizer.learning_rate},
                      {"momentum", c.optimizer.momentum},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"eps", c.optimizer.eps}};
    j["schedule"] = {{"epochs", c.schedule.epochs},
                     {"batch_size", c.schedule.batch_size},
                     {"batches_per_epoch", c.schedule.batches_per_epoch}};
    j["eval"] = to_json(c.eval);
    j["output"] = {{"dir", c.output.dir},
                   {"metrics", c.output.metrics},
                   {"checkpoint", c.output.checkpoint},
                   {"summary", c.output.summary},
                   {"checkpoint_every", c.output.checkpoint_every}};
    return j;
}

Dataset build_dataset(const DatasetConfig& config) {
    Rng rng = Rng(config.seed).fork("dataset");
    Dataset ds;
    if (config.kind == "blobs") {
        ds = make_blobs(rng, config.classes, config.per_class, config.dim, config.center_spread, config.std);
    } else if (config.kind == "moons") {
        ds = make_moons(rng, config.per_class, config.noise_std);
    } else if (config.kind == "circles") {
        ds = make_circles(rng, config.per_class, config.noise_std);
    } else if (config.kind == "csv") {
        ds = read_csv(config.path);
    } else {
        throw ConfigError("dataset: unknown kind '" + config.kind + "'");
    }
    ds.validate();
    return ds;
}

} // namespace contrastive
