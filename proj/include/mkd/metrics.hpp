#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkd/model.hpp"
#include "mkd/replay_buffer.hpp"
#include "mkd/tensor.hpp"

namespace mkd {

/// a[k][i]: accuracy on task i after training task k. Entries may be absent.
class AccuracyMatrix {
public:
    explicit AccuracyMatrix(std::size_t n_tasks = 0);

    std::size_t n_tasks() const noexcept { return k_; }
    /// Throws unless value lies in [0, 1].
    void set(std::size_t k, std::size_t i, double value);
    std::optional<double> get(std::size_t k, std::size_t i) const;
    /// Throws if the entry is absent.
    double at(std::size_t k, std::size_t i) const;

    /// Rectangular text table, "-" for absent entries.
    std::string to_text() const;
    static AccuracyMatrix from_text(const std::string& text);

private:
    std::size_t k_;
    std::vector<std::optional<double>> a_;
};

/// Mean of the last row.
double final_avg_accuracy(const AccuracyMatrix& m);
/// (1/(K-1)) * sum over i < K-1 of (a[K-1][i] - a[i][i]). Throws for K < 2.
double backward_transfer(const AccuracyMatrix& m);

struct DriftSeries {
    std::vector<std::size_t> steps;
    std::vector<double> d;

    void push(std::size_t step, double value);
    std::size_t size() const noexcept { return steps.size(); }
};

/// Fraction of rows whose argmax equals the label.
double accuracy_from_logits(const Tensor& logits, std::span<const int> labels);

/// Evaluation-mode logits computed in chunks of batch_size rows.
Tensor batched_forward(const Classifier& model, const Tensor& images, std::size_t batch_size = 256);
Tensor batched_features(const Classifier& model, const Tensor& images, std::size_t batch_size = 256);

/// Nearest class mean (Euclidean) over the given features. Classes absent from
/// train_labels are never predicted.
std::vector<int> ncm_predict(const Tensor& train_features, std::span<const int> train_labels,
                             const Tensor& query_features, std::size_t n_classes);

/// Accuracy of a nearest-class-mean classifier fit on the features of the
/// memory items. Throws, listing them, if a test class has no exemplar.
double ncm_eval(const Classifier& model, const ReplayBuffer& memory, const Tensor& test_images,
                std::span<const int> test_labels);

/// Frobenius norm of the difference of two stacked [B, D] feature matrices.
double stacked_feature_distance(const Tensor& a, const Tensor& b);
/// ||f_before(x_old) - f_after(x_old)||, stacked over the rows of x_old.
double feature_drift(const Classifier& before, const Classifier& after, const Tensor& x_old);

/// counts[i][j] = number of samples with label i predicted as j.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;
ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels, std::size_t n_classes);

}  // namespace mkd
