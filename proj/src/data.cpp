#include "contrastive/data.hpp"

#include "contrastive/error.hpp"
#include "contrastive/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace contrastive {

namespace {

Dataset two_class_curve(Rng& rng, std::size_t per_class, double noise_std, const char* name, auto&& point_of) {
    if (per_class == 0) throw DomainError(std::string(name) + ": per_class must be >= 1");
    if (!(noise_std >= 0.0)) throw DomainError(std::string(name) + ": noise_std must be >= 0");
    Dataset ds{Matrix(2 * per_class, 2), std::vector<int>(2 * per_class), name};
    for (int label = 0; label < 2; ++label) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t row = static_cast<std::size_t>(label) * per_class + i;
            auto [x, y] = point_of(label, i);
            if (noise_std > 0.0) {
                x += noise_std * rng.normal();
                y += noise_std * rng.normal();
            }
            ds.points(row, 0) = x;
            ds.points(row, 1) = y;
            ds.labels[row] = label;
        }
    }
    return ds;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view field, const std::string& where) {
    T value{};
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ConfigError(where + ": cannot parse '" + std::string(field) + "'");
    return value;
}

} // namespace

std::size_t Dataset::num_classes() const {
    if (labels.empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

void Dataset::validate() const {
    if (labels.size() != points.rows()) {
        throw DimensionError("dataset '" + name + "': " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(points.rows()) + " points");
    }
    std::set<int> seen(labels.begin(), labels.end());
    if (!seen.empty() && (*seen.begin() != 0 || static_cast<std::size_t>(*seen.rbegin()) + 1 != seen.size())) {
        throw ConfigError("dataset '" + name + "': class labels must be contiguous from 0");
    }
    if (!all_finite(points.span())) throw NumericalError("dataset '" + name + "': non-finite coordinate");
}

bool AugmentationSpec::is_identity() const noexcept {
    return gaussian_noise_std == 0.0 && coordinate_dropout_prob == 0.0 && rotation_max_radians == 0.0 &&
           scale_jitter == 0.0;
}

void AugmentationSpec::validate(bool allow_identity) const {
    if (!(gaussian_noise_std >= 0.0)) throw ConfigError("augmentation: gaussian_noise_std must be >= 0");
    if (!(coordinate_dropout_prob >= 0.0 && coordinate_dropout_prob < 1.0)) {
        throw ConfigError("augmentation: coordinate_dropout_prob must lie in [0, 1)");
    }
    if (!(rotation_max_radians >= 0.0)) throw ConfigError("augmentation: rotation_max_radians must be >= 0");
    if (!(scale_jitter >= 0.0)) throw ConfigError("augmentation: scale_jitter must be >= 0");
    if (!allow_identity && is_identity()) {
        throw ConfigError("augmentation: at least one strength must be > 0 (identical views trivialize the task)");
    }
}

Dataset make_blobs(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t dim, double center_spread,
                   double std) {
    if (classes == 0 || per_class == 0 || dim == 0) throw DomainError("make_blobs: counts must be positive");
    if (!(std >= 0.0)) throw DomainError("make_blobs: std must be >= 0");
    Dataset ds{Matrix(classes * per_class, dim), std::vector<int>(classes * per_class), "blobs"};
    std::vector<Vector> centers;
    for (std::size_t c = 0; c < classes; ++c) {
        Vector center(dim);
        for (double& x : center) x = rng.uniform(-0.5 * center_spread, 0.5 * center_spread);
        centers.push_back(std::move(center));
    }
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t row = c * per_class + i;
            for (std::size_t k = 0; k < dim; ++k) {
                ds.points(row, k) = std == 0.0 ? centers[c][k] : centers[c][k] + std * rng.normal();
            }
            ds.labels[row] = static_cast<int>(c);
        }
    }
    return ds;
}

Dataset make_moons(Rng& rng, std::size_t per_class, double noise_std) {
    const double step = per_class > 1 ? std::numbers::pi / static_cast<double>(per_class - 1) : 0.0;
    return two_class_curve(rng, per_class, noise_std, "moons", [&](int label, std::size_t i) {
        const double t = step * static_cast<double>(i);
        return label == 0 ? std::pair{std::cos(t), std::sin(t)} : std::pair{1.0 - std::cos(t), 0.5 - std::sin(t)};
    });
}

Dataset make_circles(Rng& rng, std::size_t per_class, double noise_std) {
    const double step = 2.0 * std::numbers::pi / static_cast<double>(per_class == 0 ? 1 : per_class);
    return two_class_curve(rng, per_class, noise_std, "circles", [&](int label, std::size_t i) {
        const double t = step * static_cast<double>(i);
        const double r = label == 0 ? 1.0 : 2.0;
        return std::pair{r * std::cos(t), r * std::sin(t)};
    });
}

Vector rotate2d(const Vector& x, double angle) {
    if (x.dim() != 2) throw DimensionError("rotate2d: expected a 2-D vector, got dim " + std::to_string(x.dim()));
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return Vector{c * x[0] - s * x[1], s * x[0] + c * x[1]};
}

Vector augment(Rng& rng, const Vector& x, const AugmentationSpec& spec) {
    spec.validate(/*allow_identity=*/true);
    Vector v = x;
    if (spec.rotation_max_radians > 0.0 && v.dim() == 2) {
        v = rotate2d(v, rng.uniform(-spec.rotation_max_radians, spec.rotation_max_radians));
    }
    if (spec.scale_jitter > 0.0) v *= 1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter);
    if (spec.gaussian_noise_std > 0.0) {
        for (double& c : v) c += spec.gaussian_noise_std * rng.normal();
    }
    if (spec.coordinate_dropout_prob > 0.0) {
        for (double& c : v) {
            if (rng.uniform() < spec.coordinate_dropout_prob) c = 0.0;
        }
    }
    return v;
}

ContrastiveBatch make_batch(Rng& rng, const Dataset& dataset, std::size_t batch_size, const AugmentationSpec& spec) {
    if (batch_size < 2) throw DomainError("make_batch: batch_size must be >= 2 (no negatives otherwise)");
    if (batch_size > dataset.size()) {
        throw DomainError("make_batch: batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                          std::to_string(dataset.size()));
    }
    // Partial Fisher-Yates: the first batch_size slots end up a uniform
    // sample without replacement.
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t j = i + rng.uniform_index(idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    ContrastiveBatch batch;
    batch.anchors.reserve(batch_size);
    batch.positives.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const Vector x = dataset.point(idx[i]);
        batch.anchors.push_back(augment(rng, x, spec));
        batch.positives.push_back(augment(rng, x, spec));
        batch.source.push_back(idx[i]);
    }
    return batch;
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset out{Matrix(indices.size(), dataset.dim()), std::vector<int>(indices.size()), dataset.name};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        auto src = dataset.points.row(indices[r]);
        std::copy(src.begin(), src.end(), out.points.row(r).begin());
        out.labels[r] = dataset.labels[indices[r]];
    }
    return out;
}

DatasetSplit split_dataset(const Dataset& dataset, double test_fraction, Rng& rng) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("split: test_fraction must lie in (0, 1)");
    const std::size_t n = dataset.size();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    if (n_test == 0 || n_test >= n) throw ConfigError("split: dataset too small for the requested test_fraction");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
    std::vector<std::size_t> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {subset(dataset, train), subset(dataset, test)};
}

Dataset read_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file (header row required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_commas(line);
    if (header.size() < 2 || header.back() != "label") {
        throw ConfigError(path.string() + ":1: header must be f0,...,f{d-1},label");
    }
    const std::size_t dim = header.size() - 1;
    for (std::size_t k = 0; k < dim; ++k) {
        if (header[k] != "f" + std::to_string(k)) {
            throw ConfigError(path.string() + ":1: expected column 'f" + std::to_string(k) + "', found '" +
                              std::string(header[k]) + "'");
        }
    }
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_commas(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (fields.size() != dim + 1) {
            throw ConfigError(where + ": expected " + std::to_string(dim + 1) + " columns, found " +
                              std::to_string(fields.size()));
        }
        for (std::size_t k = 0; k < dim; ++k) values.push_back(parse_number<double>(fields[k], where));
        labels.push_back(parse_number<int>(fields[dim], where));
    }
    if (labels.empty()) throw ConfigError(path.string() + ": no data rows");
    Dataset ds{Matrix(labels.size(), dim, std::move(values)), std::move(labels), path.stem().string()};
    ds.validate();
    return ds;
}

std::string to_csv(const Dataset& dataset) {
    std::string out;
    for (std::size_t k = 0; k < dataset.dim(); ++k) out += "f" + std::to_string(k) + ",";
    out += "label\n";
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        for (double x : dataset.points.row(r)) out += format_double(x) + ",";
        out += std::to_string(dataset.labels[r]) + "\n";
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& dataset) { write_file_atomic(path, to_csv(dataset)); }

} // namespace contrastive
