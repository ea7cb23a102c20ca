#include "mkd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mkd {

AccuracyMatrix::AccuracyMatrix(std::size_t n_tasks) : k_(n_tasks), a_(n_tasks * n_tasks) {}

void AccuracyMatrix::set(std::size_t k, std::size_t i, double value) {
    if (k >= k_ || i >= k_) throw std::out_of_range("accuracy matrix index out of range");
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("accuracy must lie in [0, 1]");
    a_[k * k_ + i] = value;
}

std::optional<double> AccuracyMatrix::get(std::size_t k, std::size_t i) const {
    if (k >= k_ || i >= k_) throw std::out_of_range("accuracy matrix index out of range");
    return a_[k * k_ + i];
}

double AccuracyMatrix::at(std::size_t k, std::size_t i) const {
    const auto v = get(k, i);
    if (!v) throw std::invalid_argument("accuracy a[" + std::to_string(k) + "][" + std::to_string(i) + "] is missing");
    return *v;
}

std::string AccuracyMatrix::to_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t k = 0; k < k_; ++k) {
        for (std::size_t i = 0; i < k_; ++i) {
            if (i) os << '\t';
            if (const auto v = a_[k * k_ + i])
                os << *v;
            else
                os << '-';
        }
        os << '\n';
    }
    return os.str();
}

AccuracyMatrix AccuracyMatrix::from_text(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        rows.emplace_back();
        for (std::string cell; ls >> cell;) rows.back().push_back(cell);
    }
    AccuracyMatrix m(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].size() != rows.size()) throw std::invalid_argument("accuracy matrix text is not square");
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[k][i] != "-") m.set(k, i, std::stod(rows[k][i]));
    }
    return m;
}

double final_avg_accuracy(const AccuracyMatrix& m) {
    const auto K = m.n_tasks();
    if (K == 0) throw std::invalid_argument("empty accuracy matrix");
    double s = 0.0;
    for (std::size_t i = 0; i < K; ++i) s += m.at(K - 1, i);
    return s / static_cast<double>(K);
}

double backward_transfer(const AccuracyMatrix& m) {
    const auto K = m.n_tasks();
    if (K < 2) throw std::invalid_argument("backward transfer needs at least two tasks");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < K; ++i) s += m.at(K - 1, i) - m.at(i, i);
    return s / static_cast<double>(K - 1);
}

void DriftSeries::push(std::size_t step, double value) {
    if (!steps.empty() && step <= steps.back()) throw std::invalid_argument("drift steps must increase");
    if (!(value >= 0.0)) throw std::invalid_argument("drift must be non-negative");
    steps.push_back(step);
    d.push_back(value);
}

double accuracy_from_logits(const Tensor& logits, std::span<const int> labels) {
    if (logits.rows() != labels.size()) throw std::invalid_argument("logits and labels disagree in length");
    if (labels.empty()) throw std::invalid_argument("accuracy of an empty set");
    const auto pred = predict_labels(logits);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

namespace {

template <typename F>
Tensor chunked(const Tensor& images, std::size_t batch_size, std::size_t out_cols, F&& f) {
    Tensor out({images.rows(), out_cols});
    for (std::size_t b = 0; b < images.rows(); b += batch_size) {
        const auto e = std::min(images.rows(), b + batch_size);
        const Tensor part = f(images.slice_rows(b, e));
        std::copy(part.storage().begin(), part.storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(b * out_cols));
    }
    return out;
}

}  // namespace

Tensor batched_forward(const Classifier& model, const Tensor& images, std::size_t batch_size) {
    return chunked(images, batch_size, model.arch().n_classes, [&](const Tensor& x) { return model.forward(x); });
}

Tensor batched_features(const Classifier& model, const Tensor& images, std::size_t batch_size) {
    return chunked(images, batch_size, model.arch().feature_dim, [&](const Tensor& x) { return model.features(x); });
}

std::vector<int> ncm_predict(const Tensor& train_features, std::span<const int> train_labels,
                             const Tensor& query_features, std::size_t n_classes) {
    if (train_features.rows() != train_labels.size()) throw std::invalid_argument("features and labels disagree");
    const std::size_t D = train_features.row_size();
    if (query_features.rows() > 0 && query_features.row_size() != D)
        throw std::invalid_argument("query features have a different dimension");
    std::vector<double> means(n_classes * D, 0.0);
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::size_t r = 0; r < train_labels.size(); ++r) {
        const auto c = static_cast<std::size_t>(train_labels[r]);
        if (c >= n_classes) throw std::invalid_argument("label out of range");
        ++counts[c];
        for (std::size_t j = 0; j < D; ++j) means[c * D + j] += train_features.at(r, j);
    }
    for (std::size_t c = 0; c < n_classes; ++c)
        if (counts[c])
            for (std::size_t j = 0; j < D; ++j) means[c * D + j] /= static_cast<double>(counts[c]);
    std::vector<int> pred(query_features.rows(), -1);
    for (std::size_t r = 0; r < query_features.rows(); ++r) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_classes; ++c) {
            if (!counts[c]) continue;
            double d2 = 0.0;
            for (std::size_t j = 0; j < D; ++j) {
                const double t = query_features.at(r, j) - means[c * D + j];
                d2 += t * t;
            }
            if (d2 < best) best = d2, pred[r] = static_cast<int>(c);
        }
    }
    return pred;
}

double ncm_eval(const Classifier& model, const ReplayBuffer& memory, const Tensor& test_images,
                std::span<const int> test_labels) {
    if (memory.size() == 0) throw std::invalid_argument("ncm_eval needs a non-empty memory");
    const auto n_classes = model.arch().n_classes;
    std::vector<char> have(n_classes, 0);
    for (int c : memory.labels()) have[static_cast<std::size_t>(c)] = 1;
    std::vector<char> needed(n_classes, 0);
    for (int c : test_labels) needed.at(static_cast<std::size_t>(c)) = 1;
    std::string missing;
    for (std::size_t c = 0; c < n_classes; ++c)
        if (needed[c] && !have[c]) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
    if (!missing.empty()) throw std::invalid_argument("no memory exemplar for test classes: " + missing);

    const auto mem = memory.all();
    const auto pred = ncm_predict(batched_features(model, mem.images), mem.labels, batched_features(model, test_images),
                                  n_classes);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == test_labels[i];
    return static_cast<double>(hit) / static_cast<double>(test_labels.size());
}

double stacked_feature_distance(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("feature matrices differ in shape");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double feature_drift(const Classifier& before, const Classifier& after, const Tensor& x_old) {
    if (x_old.rows() == 0) throw std::invalid_argument("feature_drift needs at least one old-class sample");
    return stacked_feature_distance(batched_features(before, x_old), batched_features(after, x_old));
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels, std::size_t n_classes) {
    if (predictions.size() != labels.size()) throw std::invalid_argument("predictions and labels disagree in length");
    ConfusionMatrix m(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || predictions[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes ||
            static_cast<std::size_t>(predictions[i]) >= n_classes)
            throw std::out_of_range("class id out of range in confusion_matrix");
        ++m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    }
    return m;
}

}  // namespace mkd
