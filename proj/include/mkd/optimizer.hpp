#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mkd/tensor.hpp"

namespace mkd {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.1;
    double momentum = 0.0;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

/// Update rules follow the PyTorch formulations (weight decay added to the
/// gradient, SGD momentum buffer without dampening, bias-corrected Adam).
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::span<Scalar> params, std::span<const Scalar> grad) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg, std::size_t n_params);

}  // namespace mkd
