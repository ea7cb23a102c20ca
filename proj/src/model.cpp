#include "mkd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "mkd/kernels.hpp"

namespace mkd {

namespace {

namespace kp = kernels::parallel;

std::vector<std::size_t> batched(std::size_t b, const std::vector<std::size_t>& per_sample) {
    std::vector<std::size_t> s{b};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    return s;
}

void uniform_fill(std::span<Scalar> out, Scalar bound, Rng& rng) {
    for (auto& v : out) v = (2.0 * uniform01(rng) - 1.0) * bound;
}

class Conv2d final : public Layer {
public:
    Conv2d(std::size_t in_c, std::size_t out_c, std::size_t h, std::size_t w)
        : out_c_(out_c), geo_{in_c, h, w, 3, 1} {}

    std::string name() const override { return "conv3x3"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>&) const override {
        return {out_c_, geo_.out_height(), geo_.out_width()};
    }
    std::size_t param_count() const override { return out_c_ * geo_.patch_size() + out_c_; }
    void init(std::span<Scalar> p, Rng& rng) const override {
        const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(geo_.patch_size()));
        uniform_fill(p, bound, rng);
    }

    Tensor forward(const Tensor& x, std::span<const Scalar> p, LayerCache* cache) const override {
        const std::size_t b = x.rows();
        const std::size_t hw = geo_.out_height() * geo_.out_width();
        const std::size_t k = geo_.patch_size();
        Tensor cols({k, b * hw});
        kp::im2col(geo_, b, x.data(), cols.data());
        std::vector<Scalar> y(out_c_ * b * hw);
        kp::gemm_nn(out_c_, b * hw, k, p.data(), cols.data(), y.data());
        Tensor out({b, out_c_, geo_.out_height(), geo_.out_width()});
        const Scalar* bias = p.data() + out_c_ * k;
        for (std::size_t oc = 0; oc < out_c_; ++oc)
            for (std::size_t bi = 0; bi < b; ++bi) {
                const Scalar* src = y.data() + (oc * b + bi) * hw;
                Scalar* dst = out.data() + (bi * out_c_ + oc) * hw;
                for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + bias[oc];
            }
        if (cache) cache->input = std::move(cols);
        return out;
    }

    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<const Scalar> p,
                    std::span<Scalar> g, bool need_input_grad) const override {
        const std::size_t b = grad_out.rows();
        const std::size_t hw = geo_.out_height() * geo_.out_width();
        const std::size_t k = geo_.patch_size();
        std::vector<Scalar> dy(out_c_ * b * hw);
        Scalar* gb = g.data() + out_c_ * k;
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t oc = 0; oc < out_c_; ++oc) {
                const Scalar* src = grad_out.data() + (bi * out_c_ + oc) * hw;
                Scalar* dst = dy.data() + (oc * b + bi) * hw;
                Scalar s = 0.0;
                for (std::size_t i = 0; i < hw; ++i) {
                    dst[i] = src[i];
                    s += src[i];
                }
                gb[oc] += s;
            }
        kp::gemm_nt(out_c_, k, b * hw, dy.data(), cache.input.data(), g.data(), 1.0);
        if (!need_input_grad) return {};
        std::vector<Scalar> dcols(k * b * hw);
        kp::gemm_tn(k, b * hw, out_c_, p.data(), dy.data(), dcols.data());
        Tensor dx({b, geo_.channels, geo_.height, geo_.width});
        kp::col2im(geo_, b, dcols.data(), dx.data());
        return dx;
    }

private:
    std::size_t out_c_;
    kernels::ConvGeometry geo_;
};

class Relu final : public Layer {
public:
    std::string name() const override { return "relu"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override { return in; }
    Tensor forward(const Tensor& x, std::span<const Scalar>, LayerCache* cache) const override {
        Tensor out = x;
        for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
        if (cache) cache->output = out;
        return out;
    }
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<const Scalar>, std::span<Scalar>,
                    bool need_input_grad) const override {
        if (!need_input_grad) return {};
        Tensor dx = grad_out;
        const auto& y = cache.output.storage();
        auto& d = dx.storage();
        for (std::size_t i = 0; i < d.size(); ++i)
            if (y[i] <= 0.0) d[i] = 0.0;
        return dx;
    }
};

class MaxPool2 final : public Layer {
public:
    std::string name() const override { return "maxpool2"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return {in[0], in[1] / 2, in[2] / 2};
    }
    Tensor forward(const Tensor& x, std::span<const Scalar>, LayerCache* cache) const override {
        const std::size_t b = x.rows(), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        Tensor out({b, c, h / 2, w / 2});
        std::vector<std::size_t> argmax(out.size());
        kp::maxpool2(b * c, h, w, x.data(), out.data(), argmax.data());
        if (cache) {
            cache->index = std::move(argmax);
            cache->shape = x.shape();
        }
        return out;
    }
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<const Scalar>, std::span<Scalar>,
                    bool need_input_grad) const override {
        if (!need_input_grad) return {};
        const auto& s = cache.shape;
        Tensor dx(s);
        kp::maxpool2_backward(s[0] * s[1], s[2], s[3], grad_out.data(), cache.index.data(), dx.data());
        return dx;
    }
};

class Flatten final : public Layer {
public:
    std::string name() const override { return "flatten"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const override {
        return {shape_numel(in)};
    }
    Tensor forward(const Tensor& x, std::span<const Scalar>, LayerCache* cache) const override {
        if (cache) cache->shape = x.shape();
        return x.reshaped({x.rows(), x.row_size()});
    }
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<const Scalar>, std::span<Scalar>,
                    bool need_input_grad) const override {
        if (!need_input_grad) return {};
        return grad_out.reshaped(cache.shape);
    }
};

class Linear final : public Layer {
public:
    Linear(std::size_t in, std::size_t out) : in_(in), out_(out) {}
    std::string name() const override { return "linear"; }
    std::vector<std::size_t> output_shape(const std::vector<std::size_t>&) const override { return {out_}; }
    std::size_t param_count() const override { return out_ * in_ + out_; }
    void init(std::span<Scalar> p, Rng& rng) const override {
        uniform_fill(p, 1.0 / std::sqrt(static_cast<Scalar>(in_)), rng);
    }
    Tensor forward(const Tensor& x, std::span<const Scalar> p, LayerCache* cache) const override {
        const std::size_t b = x.rows();
        Tensor out({b, out_});
        kp::gemm_nt(b, out_, in_, x.data(), p.data(), out.data());
        const Scalar* bias = p.data() + out_ * in_;
        for (std::size_t r = 0; r < b; ++r)
            for (std::size_t j = 0; j < out_; ++j) out.data()[r * out_ + j] += bias[j];
        if (cache) cache->input = x;
        return out;
    }
    Tensor backward(const Tensor& grad_out, const LayerCache& cache, std::span<const Scalar> p,
                    std::span<Scalar> g, bool need_input_grad) const override {
        const std::size_t b = grad_out.rows();
        kp::gemm_tn(out_, in_, b, grad_out.data(), cache.input.data(), g.data(), 1.0);
        Scalar* gb = g.data() + out_ * in_;
        for (std::size_t r = 0; r < b; ++r)
            for (std::size_t j = 0; j < out_; ++j) gb[j] += grad_out.data()[r * out_ + j];
        if (!need_input_grad) return {};
        Tensor dx({b, in_});
        kp::gemm_nn(b, in_, out_, grad_out.data(), p.data(), dx.data());
        return dx;
    }

private:
    std::size_t in_, out_;
};

}  // namespace

std::string to_string(Backbone b) { return b == Backbone::cnn ? "cnn" : "mlp"; }

Backbone parse_backbone(const std::string& s) {
    if (s == "cnn") return Backbone::cnn;
    if (s == "mlp") return Backbone::mlp;
    throw std::invalid_argument("unknown backbone '" + s + "' (expected cnn or mlp)");
}

std::string arch_to_json(const ArchSpec& a) {
    nlohmann::json j{{"backbone", to_string(a.backbone)}, {"channels", a.channels},
                     {"height", a.height},                {"width", a.width},
                     {"n_classes", a.n_classes},          {"conv_channels", a.conv_channels},
                     {"hidden", a.hidden},                {"feature_dim", a.feature_dim}};
    return j.dump();
}

ArchSpec arch_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ArchSpec a;
    a.backbone = parse_backbone(j.at("backbone").get<std::string>());
    a.channels = j.at("channels");
    a.height = j.at("height");
    a.width = j.at("width");
    a.n_classes = j.at("n_classes");
    a.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
    a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    a.feature_dim = j.at("feature_dim");
    return a;
}

Network::Network(ArchSpec spec) : spec_(std::move(spec)) {
    if (spec_.n_classes == 0 || spec_.feature_dim == 0 || spec_.input_size() == 0)
        throw std::invalid_argument("architecture needs positive input size, feature_dim and n_classes");
    std::vector<std::size_t> shape{spec_.channels, spec_.height, spec_.width};
    auto add = [&](std::unique_ptr<Layer> l) {
        shape = l->output_shape(shape);
        layers_.push_back(std::move(l));
    };
    if (spec_.backbone == Backbone::cnn) {
        for (auto oc : spec_.conv_channels) {
            if (shape[1] < 2 || shape[2] < 2) throw std::invalid_argument("too many conv blocks for input size");
            add(std::make_unique<Conv2d>(shape[0], oc, shape[1], shape[2]));
            add(std::make_unique<Relu>());
            add(std::make_unique<MaxPool2>());
        }
    }
    add(std::make_unique<Flatten>());
    if (spec_.backbone == Backbone::mlp) {
        for (auto h : spec_.hidden) {
            add(std::make_unique<Linear>(shape[0], h));
            add(std::make_unique<Relu>());
        }
    }
    add(std::make_unique<Linear>(shape[0], spec_.feature_dim));
    add(std::make_unique<Relu>());
    head_index_ = layers_.size();
    add(std::make_unique<Linear>(spec_.feature_dim, spec_.n_classes));

    for (const auto& l : layers_) {
        offsets_.push_back(param_count_);
        param_count_ += l->param_count();
    }
}

Classifier::Classifier(const ArchSpec& spec)
    : net_(std::make_shared<const Network>(spec)), state_(net_->param_count(), 0.0) {}

Classifier::Classifier(std::shared_ptr<const Network> net, std::vector<Scalar> state)
    : net_(std::move(net)), state_(std::move(state)) {
    if (state_.size() != net_->param_count())
        throw std::invalid_argument("state size " + std::to_string(state_.size()) + " does not match architecture (" +
                                    std::to_string(net_->param_count()) + ")");
}

void Classifier::initialize(std::uint64_t seed) {
    Rng rng = make_rng(seed, RngStream::init);
    for (std::size_t i = 0; i < net_->layer_count(); ++i) {
        const auto& l = net_->layer(i);
        l.init(std::span<Scalar>(state_).subspan(net_->param_offset(i), l.param_count()), rng);
    }
}

void Classifier::set_params(std::span<const Scalar> values) {
    if (values.size() != state_.size())
        throw std::invalid_argument("parameter layout mismatch: got " + std::to_string(values.size()) + ", expected " +
                                    std::to_string(state_.size()));
    std::copy(values.begin(), values.end(), state_.begin());
}

std::span<Scalar> Classifier::head_params() {
    const auto h = net_->head_index();
    return std::span<Scalar>(state_).subspan(net_->param_offset(h), net_->layer(h).param_count());
}

void Classifier::check_input(const Tensor& images) const {
    const auto& a = arch();
    const auto& s = images.shape();
    const bool ok = (s.size() == 4 && s[1] == a.channels && s[2] == a.height && s[3] == a.width) ||
                    (s.size() == 2 && s[1] == a.input_size());
    if (!ok)
        throw std::invalid_argument("input shape " + images.shape_string() + " does not match model input [B, " +
                                    std::to_string(a.channels) + ", " + std::to_string(a.height) + ", " +
                                    std::to_string(a.width) + "]");
}

Tensor Classifier::run(const Tensor& images, std::size_t end_layer, std::vector<LayerCache>* caches) const {
    check_input(images);
    const auto& a = arch();
    Tensor x = images.rank() == 4 ? images : images.reshaped({images.rows(), a.channels, a.height, a.width});
    if (x.rows() == 0) {
        std::vector<std::size_t> shape{a.channels, a.height, a.width};
        for (std::size_t i = 0; i < end_layer; ++i) shape = net_->layer(i).output_shape(shape);
        return Tensor(batched(0, shape));
    }
    if (caches) caches->resize(end_layer);
    for (std::size_t i = 0; i < end_layer; ++i) {
        const auto& l = net_->layer(i);
        const auto p = std::span<const Scalar>(state_).subspan(net_->param_offset(i), l.param_count());
        x = l.forward(x, p, caches ? &(*caches)[i] : nullptr);
    }
    return x;
}

Tensor Classifier::forward(const Tensor& images) const { return run(images, net_->layer_count(), nullptr); }

Tensor Classifier::features(const Tensor& images) const { return run(images, net_->head_index(), nullptr); }

ForwardTrace Classifier::forward_train(const Tensor& images) const {
    ForwardTrace t;
    t.features = run(images, net_->head_index(), &t.caches);
    if (t.features.rows() == 0) {
        t.logits = Tensor({0, arch().n_classes});
        return t;
    }
    t.caches.resize(net_->layer_count());
    Tensor x = t.features;
    for (std::size_t i = net_->head_index(); i < net_->layer_count(); ++i) {
        const auto& l = net_->layer(i);
        const auto p = std::span<const Scalar>(state_).subspan(net_->param_offset(i), l.param_count());
        x = l.forward(x, p, &t.caches[i]);
    }
    t.logits = std::move(x);
    return t;
}

void Classifier::backward(const ForwardTrace& trace, const Tensor& grad_logits, std::span<Scalar> grad) const {
    if (grad.size() != state_.size()) throw std::invalid_argument("gradient buffer layout mismatch");
    if (grad_logits.shape() != trace.logits.shape())
        throw std::invalid_argument("grad_logits shape " + grad_logits.shape_string() + " != logits shape " +
                                    trace.logits.shape_string());
    if (grad_logits.rows() == 0) return;
    Tensor g = grad_logits;
    for (std::size_t i = net_->layer_count(); i-- > 0;) {
        const auto& l = net_->layer(i);
        const auto off = net_->param_offset(i);
        g = l.backward(g, trace.caches[i], std::span<const Scalar>(state_).subspan(off, l.param_count()),
                       grad.subspan(off, l.param_count()), i > 0);
    }
}

namespace {
constexpr char kMagic[8] = {'M', 'K', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void Classifier::save(const std::filesystem::path& path, const std::map<std::string, std::string>& hyper) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    const std::string arch_json = arch_to_json(arch());
    const auto arch_len = static_cast<std::uint64_t>(arch_json.size());
    const auto n = static_cast<std::uint64_t>(state_.size());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    out.write(reinterpret_cast<const char*>(&arch_len), sizeof arch_len);
    out.write(arch_json.data(), static_cast<std::streamsize>(arch_len));
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(state_.data()), static_cast<std::streamsize>(n * sizeof(Scalar)));
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());

    nlohmann::json side{{"format_version", kVersion}, {"architecture", nlohmann::json::parse(arch_json)},
                        {"param_count", n}, {"hyperparameters", hyper}};
    std::ofstream js(path.string() + ".json");
    js << side.dump(2) << '\n';
}

Classifier Classifier::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t arch_len = 0, n = 0;
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a checkpoint: " + path.string());
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    in.read(reinterpret_cast<char*>(&arch_len), sizeof arch_len);
    std::string arch_json(arch_len, '\0');
    in.read(arch_json.data(), static_cast<std::streamsize>(arch_len));
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    std::vector<Scalar> state(n);
    in.read(reinterpret_cast<char*>(state.data()), static_cast<std::streamsize>(n * sizeof(Scalar)));
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    return Classifier(std::make_shared<const Network>(arch_from_json(arch_json)), std::move(state));
}

std::vector<int> predict_labels(const Tensor& logits) {
    std::vector<int> out(logits.rows());
    const auto c = logits.row_size();
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const Scalar* row = logits.data() + r * c;
        out[r] = static_cast<int>(std::max_element(row, row + c) - row);
    }
    return out;
}

}  // namespace mkd
