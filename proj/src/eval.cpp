#include "contrastive/eval.hpp"

#include "contrastive/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace contrastive {

namespace {

struct Neighbour {
    double sq_dist;
    int label;
};

void check_labelled(std::span<const Vector> x, std::span<const int> y, const char* what) {
    if (x.size() != y.size()) {
        throw DimensionError(std::string(what) + ": " + std::to_string(x.size()) + " embeddings but " +
                             std::to_string(y.size()) + " labels");
    }
}

} // namespace

std::vector<int> knn_classify(std::span<const Vector> train, std::span<const int> train_labels,
                              std::span<const Vector> queries, std::size_t k) {
    check_labelled(train, train_labels, "knn_classify");
    if (train.empty()) throw DomainError("knn_classify: empty training set");
    if (k == 0 || k > train.size()) {
        throw DomainError("knn_classify: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(train.size()) +
                          "]");
    }
    const auto closer = [](const Neighbour& a, const Neighbour& b) {
        return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.label < b.label);
    };

    std::vector<int> predictions;
    predictions.reserve(queries.size());
    std::vector<Neighbour> neighbours(train.size());
    for (const Vector& q : queries) {
        for (std::size_t i = 0; i < train.size(); ++i) neighbours[i] = {sq_euclid(q, train[i]), train_labels[i]};
        std::partial_sort(neighbours.begin(), neighbours.begin() + static_cast<std::ptrdiff_t>(k), neighbours.end(),
                          closer);

        // label -> (votes, summed distance); std::map iterates labels in order.
        std::map<int, std::pair<std::size_t, double>> tally;
        for (std::size_t i = 0; i < k; ++i) {
            auto& [votes, dist] = tally[neighbours[i].label];
            ++votes;
            dist += std::sqrt(neighbours[i].sq_dist);
        }
        int best = tally.begin()->first;
        std::size_t best_votes = 0;
        double best_mean = 0.0;
        for (const auto& [label, entry] : tally) {
            const double mean = entry.second / static_cast<double>(entry.first);
            if (entry.first > best_votes || (entry.first == best_votes && mean < best_mean)) {
                best = label;
                best_votes = entry.first;
                best_mean = mean;
            }
        }
        predictions.push_back(best);
    }
    return predictions;
}

double top1(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) {
        throw DimensionError("top1: " + std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw DomainError("top1: no predictions");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

EvalReport knn_evaluate(std::span<const Vector> train, std::span<const int> train_labels,
                        std::span<const Vector> test, std::span<const int> test_labels, std::size_t k) {
    check_labelled(test, test_labels, "knn_evaluate");
    const auto pred = knn_classify(train, train_labels, test, k);
    EvalReport r;
    r.method = EvalMethod::KNN;
    r.k = k;
    r.total = test_labels.size();
    for (std::size_t i = 0; i < pred.size(); ++i) r.correct += pred[i] == test_labels[i];
    r.top1_accuracy = top1(pred, test_labels);
    return r;
}

EvalReport linear_probe(std::span<const Vector> train, std::span<const int> train_labels,
                        std::span<const Vector> test, std::span<const int> test_labels, std::size_t epochs,
                        double lr) {
    check_labelled(train, train_labels, "linear_probe (train)");
    check_labelled(test, test_labels, "linear_probe (test)");
    if (std::set<int>(train_labels.begin(), train_labels.end()).size() < 2) {
        throw DomainError("linear_probe: training labels must contain at least two classes");
    }
    if (test.empty()) throw DomainError("linear_probe: empty test set");
    const std::size_t dim = train.front().dim();
    int max_label = 0;
    for (int y : train_labels) max_label = std::max(max_label, y);
    for (int y : test_labels) max_label = std::max(max_label, y);
    const auto classes = static_cast<std::size_t>(max_label) + 1;

    std::vector<Vector> xs;
    xs.reserve(train.size());
    for (const auto& x : train) xs.push_back(l2_normalize(x));

    Matrix weight(classes, dim);
    Vector bias(classes);
    const double inv_n = 1.0 / static_cast<double>(xs.size());

    auto logits_of = [&](const Vector& x) {
        Vector z = matvec(weight, x);
        z += bias;
        return z;
    };

    EvalReport r;
    r.method = EvalMethod::Linear;
    r.probe_epochs = epochs;
    r.probe_lr = lr;
    r.probe_loss_history.reserve(epochs);
    std::vector<double> probs(classes);
    for (std::size_t e = 0; e <= epochs; ++e) {
        Matrix g_weight(classes, dim);
        Vector g_bias(classes);
        double loss = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const Vector z = logits_of(xs[i]);
            const double lse = log_sum_exp(z.span());
            const auto y = static_cast<std::size_t>(train_labels[i]);
            loss += lse - z[y];
            Vector delta(classes);
            for (std::size_t c = 0; c < classes; ++c) delta[c] = std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0);
            add_outer(g_weight, delta, xs[i], inv_n);
            g_bias.axpy(inv_n, delta);
        }
        loss *= inv_n;
        r.probe_final_loss = loss;
        if (e == epochs) break;
        r.probe_loss_history.push_back(loss);
        for (std::size_t j = 0; j < weight.size(); ++j) weight.span()[j] -= lr * g_weight.span()[j];
        bias.axpy(-lr, g_bias);
    }

    std::vector<int> pred;
    pred.reserve(test.size());
    for (const auto& x : test) {
        const Vector z = logits_of(l2_normalize(x));
        pred.push_back(static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()));
    }
    r.total = test_labels.size();
    for (std::size_t i = 0; i < pred.size(); ++i) r.correct += pred[i] == test_labels[i];
    r.top1_accuracy = top1(pred, test_labels);
    return r;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["method"] = report.method == EvalMethod::KNN ? "knn" : "linear";
    j["top1_accuracy"] = report.top1_accuracy;
    j["correct"] = report.correct;
    j["total"] = report.total;
    if (report.method == EvalMethod::KNN) {
        j["k"] = report.k;
    } else {
        j["probe_epochs"] = report.probe_epochs;
        j["probe_lr"] = report.probe_lr;
        j["probe_final_loss"] = report.probe_final_loss;
    }
    return j;
}

} // namespace contrastive
