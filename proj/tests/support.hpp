#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "mkd/dataset.hpp"
#include "mkd/losses.hpp"
#include "mkd/model.hpp"
#include "mkd/rng.hpp"

namespace mkd::testing {

/// Two-layer perceptron: input -> Linear+ReLU (embedding) -> Linear head.
inline ArchSpec tiny_mlp(std::size_t n_classes = 6, std::size_t side = 4, std::size_t feature_dim = 8) {
    ArchSpec a;
    a.backbone = Backbone::mlp;
    a.channels = 1;
    a.height = side;
    a.width = side;
    a.n_classes = n_classes;
    a.hidden = {};
    a.feature_dim = feature_dim;
    return a;
}

inline Tensor random_images(std::size_t n, const ArchSpec& a, Rng& rng) {
    Tensor t({n, a.channels, a.height, a.width});
    for (auto& v : t.storage()) v = uniform01(rng);
    return t;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t n_classes, Rng& rng) {
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(uniform_index(rng, n_classes));
    return y;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Compares the analytic gradient of `loss` (filled through a GradTape) with
/// central differences at `n_coords` random parameter coordinates.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult grad_check(Classifier& model, const std::function<double(GradTape*)>& loss,
                                  std::size_t n_coords, Rng& rng, double h = 1e-6, double floor = 1e-6) {
    GradTape tape;
    loss(&tape);
    std::vector<Scalar> grad(model.param_count(), 0.0);
    tape.backward(model, grad);

    std::vector<std::size_t> idx(model.param_count());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n_coords, idx.size()));

    GradCheckResult r;
    auto params = model.params();
    for (auto i : idx) {
        const Scalar saved = params[i];
        params[i] = saved + h;
        const double up = loss(nullptr);
        params[i] = saved - h;
        const double down = loss(nullptr);
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(grad[i]), std::abs(numeric), floor});
        r.max_rel_error = std::max(r.max_rel_error, std::abs(grad[i] - numeric) / denom);
        ++r.checked;
    }
    return r;
}

/// Dataset whose images are constant planes carrying the label, for stream tests.
inline Dataset label_dataset(std::size_t n_classes, std::size_t per_class, std::size_t side = 2) {
    Dataset d;
    d.id = "labels";
    d.n_classes = n_classes;
    d.shape = {1, side, side};
    const std::size_t n = n_classes * per_class;
    d.train_images = Tensor({n, 1, side, side});
    d.test_images = Tensor({n_classes, 1, side, side});
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % n_classes);
        d.train_labels.push_back(c);
        for (auto& v : d.train_images.row(i)) v = static_cast<double>(c) / static_cast<double>(n_classes);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        d.test_labels.push_back(static_cast<int>(c));
        for (auto& v : d.test_images.row(c)) v = static_cast<double>(c) / static_cast<double>(n_classes);
    }
    return d;
}

}  // namespace mkd::testing
