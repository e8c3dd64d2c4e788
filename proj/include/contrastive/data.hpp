#pragma once

// Synthetic labelled datasets, augmentation views and in-batch contrastive
// batches. Labels travel with a Dataset for evaluation only; nothing on the
// loss path accepts them.

#include "contrastive/numerics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace contrastive {

struct Dataset {
    Matrix points; // n x d
    std::vector<int> labels;
    std::string name;

    std::size_t size() const noexcept { return points.rows(); }
    std::size_t dim() const noexcept { return points.cols(); }
    std::size_t num_classes() const;
    Vector point(std::size_t i) const { return points.row_vector(i); }

    /// Labels length matches, classes are 0..K-1 with none missing.
    void validate() const;
};

struct AugmentationSpec {
    double gaussian_noise_std = 0.05;
    double coordinate_dropout_prob = 0.0;
    double rotation_max_radians = 0.0; // 2-D inputs only
    double scale_jitter = 0.1;

    bool is_identity() const noexcept;
    /// Rejects out-of-range strengths and, unless allow_identity, a pipeline
    /// that leaves inputs untouched.
    void validate(bool allow_identity = false) const;
};

struct ContrastiveBatch {
    std::vector<Vector> anchors;
    std::vector<Vector> positives;
    std::vector<std::size_t> source;

    std::size_t size() const noexcept { return anchors.size(); }
};

/// Gaussian clusters with centers uniform in [-spread/2, spread/2]^dim.
Dataset make_blobs(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t dim, double center_spread,
                   double std);

/// Two interleaved half circles: class 0 is (cos t, sin t), class 1 is
/// (1 - cos t, 0.5 - sin t), t evenly spaced in [0, pi].
Dataset make_moons(Rng& rng, std::size_t per_class, double noise_std);

/// Concentric circles of radius 1 (class 0) and 2 (class 1).
Dataset make_circles(Rng& rng, std::size_t per_class, double noise_std);

Vector rotate2d(const Vector& x, double angle);

/// Rotation (2-D only), scale jitter, additive noise, then coordinate
/// dropout, each drawing from `rng` only when its strength is non-zero.
Vector augment(Rng& rng, const Vector& x, const AugmentationSpec& spec);

/// Samples batch_size distinct points and emits two independent views of
/// each. Throws DomainError for batch_size < 2 or batch_size > n.
ContrastiveBatch make_batch(Rng& rng, const Dataset& dataset, std::size_t batch_size, const AugmentationSpec& spec);

struct DatasetSplit {
    Dataset train;
    Dataset test;
};

/// Seeded shuffle then split; the test side gets round(n * test_fraction)
/// points.
DatasetSplit split_dataset(const Dataset& dataset, double test_fraction, Rng& rng);

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

/// Header `f0,...,f{d-1},label`, one row per point.
Dataset read_csv(const std::filesystem::path& path);
std::string to_csv(const Dataset& dataset);
void write_csv(const std::filesystem::path& path, const Dataset& dataset);

} // namespace contrastive
