#include "mkd/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace mkd {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd or adam)");
}

void OptimizerConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
}

namespace {

void check(std::span<Scalar> p, std::span<const Scalar> g, std::size_t n) {
    if (p.size() != n || g.size() != n) throw std::invalid_argument("optimizer: parameter count changed");
}

class Sgd final : public Optimizer {
public:
    Sgd(const OptimizerConfig& c, std::size_t n) : c_(c), velocity_(c.momentum > 0.0 ? n : 0, 0.0), n_(n) {}
    void step(std::span<Scalar> p, std::span<const Scalar> g) override {
        check(p, g, n_);
        for (std::size_t i = 0; i < n_; ++i) {
            Scalar d = g[i] + c_.weight_decay * p[i];
            if (!velocity_.empty()) {
                velocity_[i] = first_ ? d : c_.momentum * velocity_[i] + d;
                d = velocity_[i];
            }
            p[i] -= c_.lr * d;
        }
        first_ = false;
    }

private:
    OptimizerConfig c_;
    std::vector<Scalar> velocity_;
    std::size_t n_;
    bool first_ = true;
};

class Adam final : public Optimizer {
public:
    Adam(const OptimizerConfig& c, std::size_t n) : c_(c), m_(n, 0.0), v_(n, 0.0), n_(n) {}
    void step(std::span<Scalar> p, std::span<const Scalar> g) override {
        check(p, g, n_);
        ++t_;
        const double bc1 = 1.0 - std::pow(c_.beta1, t_), bc2 = 1.0 - std::pow(c_.beta2, t_);
        for (std::size_t i = 0; i < n_; ++i) {
            const Scalar d = g[i] + c_.weight_decay * p[i];
            m_[i] = c_.beta1 * m_[i] + (1 - c_.beta1) * d;
            v_[i] = c_.beta2 * v_[i] + (1 - c_.beta2) * d * d;
            p[i] -= c_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + c_.eps);
        }
    }

private:
    OptimizerConfig c_;
    std::vector<Scalar> m_, v_;
    std::size_t n_;
    double t_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg, std::size_t n_params) {
    cfg.validate();
    if (cfg.kind == OptimizerKind::sgd) return std::make_unique<Sgd>(cfg, n_params);
    return std::make_unique<Adam>(cfg, n_params);
}

}  // namespace mkd
