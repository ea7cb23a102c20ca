#pragma once

// Classifier network: a backbone producing an embedding of dimension D and a
// single linear head over all classes. All learnable values live in one flat
// vector so teacher updates and weight averaging are plain vector arithmetic.
// The backbones have no normalization layers, so there are no running
// statistics to carry alongside the parameters.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mkd/rng.hpp"
#include "mkd/tensor.hpp"

namespace mkd {

enum class Backbone { cnn, mlp };

std::string to_string(Backbone b);
Backbone parse_backbone(const std::string& s);

struct ArchSpec {
    Backbone backbone = Backbone::cnn;
    std::size_t channels = 1;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t n_classes = 10;
    /// cnn: output channels of each conv3x3 + ReLU + maxpool2 block.
    std::vector<std::size_t> conv_channels = {16, 32};
    /// mlp: hidden layer widths before the embedding layer.
    std::vector<std::size_t> hidden = {};
    /// Embedding dimension D (output of the last ReLU before the head).
    std::size_t feature_dim = 64;

    std::size_t input_size() const { return channels * height * width; }
    bool operator==(const ArchSpec&) const = default;
};

std::string arch_to_json(const ArchSpec& a);
ArchSpec arch_from_json(const std::string& json);

/// Whatever a layer needs to keep between forward and backward.
struct LayerCache {
    Tensor input;
    Tensor output;
    std::vector<std::size_t> index;
    std::vector<std::size_t> shape;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string name() const = 0;
    /// Per-sample output shape for a per-sample input shape.
    virtual std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const = 0;
    virtual std::size_t param_count() const { return 0; }
    virtual void init(std::span<Scalar> /*params*/, Rng& /*rng*/) const {}
    virtual Tensor forward(const Tensor& x, std::span<const Scalar> params, LayerCache* cache) const = 0;
    /// Accumulates into grad_params; returns the input gradient when need_input_grad.
    virtual Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<const Scalar> params,
                            std::span<Scalar> grad_params, bool need_input_grad) const = 0;
};

/// Immutable architecture shared between a student and its teacher copies.
class Network {
public:
    explicit Network(ArchSpec spec);

    const ArchSpec& spec() const noexcept { return spec_; }
    std::size_t param_count() const noexcept { return param_count_; }
    std::size_t layer_count() const noexcept { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }
    std::size_t param_offset(std::size_t layer) const { return offsets_.at(layer); }
    /// Index of the first head layer; layers before it form the backbone.
    std::size_t head_index() const noexcept { return head_index_; }

private:
    ArchSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t param_count_ = 0;
    std::size_t head_index_ = 0;
};

/// Activations retained by a training forward pass.
struct ForwardTrace {
    std::vector<LayerCache> caches;
    Tensor features;
    Tensor logits;
};

class Classifier {
public:
    explicit Classifier(const ArchSpec& spec);
    Classifier(std::shared_ptr<const Network> net, std::vector<Scalar> state);

    /// PyTorch-style default init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    void initialize(std::uint64_t seed);

    const ArchSpec& arch() const noexcept { return net_->spec(); }
    const std::shared_ptr<const Network>& network() const noexcept { return net_; }
    std::size_t param_count() const noexcept { return net_->param_count(); }

    std::span<const Scalar> params() const noexcept { return state_; }
    std::span<Scalar> params() noexcept { return state_; }
    const std::vector<Scalar>& state() const noexcept { return state_; }
    /// Replaces every learnable value; the layout must match.
    void set_params(std::span<const Scalar> values);
    /// Parameters of the final linear head (weights then bias).
    std::span<Scalar> head_params();

    /// Evaluation-mode logits [B, n_classes].
    Tensor forward(const Tensor& images) const;
    /// Evaluation-mode embedding [B, D] (the head is not applied).
    Tensor features(const Tensor& images) const;
    /// Training forward pass that keeps what backward needs.
    ForwardTrace forward_train(const Tensor& images) const;
    /// Accumulates dLoss/dparams into grad given dLoss/dlogits.
    void backward(const ForwardTrace& trace, const Tensor& grad_logits, std::span<Scalar> grad) const;

    /// Binary checkpoint plus a JSON sidecar (`<path>.json`) of hyper-parameters.
    void save(const std::filesystem::path& path, const std::map<std::string, std::string>& hyper = {}) const;
    static Classifier load(const std::filesystem::path& path);

private:
    void check_input(const Tensor& images) const;
    Tensor run(const Tensor& images, std::size_t end_layer, std::vector<LayerCache>* caches) const;

    std::shared_ptr<const Network> net_;
    std::vector<Scalar> state_;
};

/// Argmax per row.
std::vector<int> predict_labels(const Tensor& logits);

}  // namespace mkd
