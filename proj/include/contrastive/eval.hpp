#pragma once

// Frozen-representation evaluation: k-NN vote and a linear softmax probe.

#include "contrastive/numerics.hpp"

#include "json.hpp"

#include <span>
#include <string>
#include <vector>

namespace contrastive {

enum class EvalMethod { KNN, Linear };

struct EvalReport {
    EvalMethod method = EvalMethod::KNN;
    double top1_accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    std::size_t k = 0; // k-NN only
    // Linear probe only.
    std::size_t probe_epochs = 0;
    double probe_lr = 0.0;
    double probe_final_loss = 0.0;
    std::vector<double> probe_loss_history; // loss before each update; not serialized
};

/// Majority label among the k nearest training embeddings (Euclidean).
/// Neighbours are ordered by (distance, label) so the result does not depend
/// on the order of the training set; vote ties go to the class with the
/// smallest mean neighbour distance, then to the lowest class index.
std::vector<int> knn_classify(std::span<const Vector> train, std::span<const int> train_labels,
                              std::span<const Vector> queries, std::size_t k);

EvalReport knn_evaluate(std::span<const Vector> train, std::span<const int> train_labels,
                        std::span<const Vector> test, std::span<const int> test_labels, std::size_t k);

/// Multinomial logistic regression on L2-normalized embeddings, trained by
/// full-batch gradient descent from zero weights. Reports test top-1.
EvalReport linear_probe(std::span<const Vector> train, std::span<const int> train_labels,
                        std::span<const Vector> test, std::span<const int> test_labels,
                        std::size_t epochs = 500, double lr = 0.1);

/// Fraction of exact matches.
double top1(std::span<const int> predictions, std::span<const int> labels);

nlohmann::ordered_json to_json(const EvalReport& report);

} // namespace contrastive
