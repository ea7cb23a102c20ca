#pragma once

// Training objectives. Every model-level loss takes an optional GradTape; when
// given, the loss records (forward trace, dLoss/dlogits) pairs for the student
// and GradTape::backward later turns them into parameter gradients. Teacher
// networks and stored logits only ever enter as constants, so no gradient can
// reach them.

#include <cstddef>
#include <span>
#include <vector>

#include "mkd/model.hpp"
#include "mkd/momentum_teacher.hpp"
#include "mkd/tensor.hpp"

namespace mkd {

struct LossBreakdown {
    double total = 0.0;
    double ce = 0.0;
    double distill = 0.0;
    double baseline_extra = 0.0;
};

/// A scalar loss and its gradient with respect to the logits it was computed from.
struct LossGrad {
    double value = 0.0;
    Tensor grad;
};

/// Row-wise softmax of logits / tau.
Tensor softmax(const Tensor& logits, double tau = 1.0);

/// Mean cross-entropy. Throws on an empty batch or an out-of-range label.
LossGrad cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Mean cross-entropy where, for rows with restrict_row[r] set, only the classes
/// flagged in allowed_classes take part in the softmax (other logits act as -inf).
LossGrad masked_cross_entropy(const Tensor& logits, std::span<const int> labels,
                              std::span<const char> restrict_row, std::span<const char> allowed_classes);

/// Batch mean of KL(softmax(teacher/tau) || softmax(student/tau)); the gradient
/// is with respect to the student logits only.
LossGrad kl_distill_with_grad(const Tensor& teacher_logits, const Tensor& student_logits, double tau);
double kl_distill(const Tensor& teacher_logits, const Tensor& student_logits, double tau);

/// Mean squared error over all elements (gradient w.r.t. prediction).
LossGrad mse(const Tensor& prediction, const Tensor& target);

/// Plain experience-replay objective on already computed logits.
double er_loss(const Tensor& batch_logits, std::span<const int> labels);

/// Collects student forward traces and the loss gradient at their logits.
class GradTape {
public:
    void record(ForwardTrace trace, Tensor grad_logits);
    /// Accumulates all recorded contributions into grad (sized like the student's parameters).
    void backward(const Classifier& student, std::span<Scalar> grad) const;
    std::size_t size() const noexcept { return entries_.size(); }
    void clear() { entries_.clear(); }

private:
    struct Entry {
        ForwardTrace trace;
        Tensor grad;
    };
    std::vector<Entry> entries_;
};

/// CE on a batch through the student (ER objective).
LossBreakdown er_objective(const Classifier& student, const Tensor& x, std::span<const int> y, GradTape* tape = nullptr);

/// CE(S(x_aug), y) + lambda/2 * KL(T(x_raw) || S(x_aug)) + lambda/2 * KL(T(x_aug) || S(x_aug)).
LossBreakdown mkd_loss(const Tensor& x_raw, const Tensor& x_aug, std::span<const int> y, const Classifier& student,
                       const Classifier& teacher, const DistillConfig& cfg, GradTape* tape = nullptr);

/// CE(S(x_aug), y) + lambda * KL(T(x_aug) || S(x_aug)).
LossBreakdown mkd_loss_single_view(const Tensor& x_aug, std::span<const int> y, const Classifier& student,
                                   const Classifier& teacher, const DistillConfig& cfg, GradTape* tape = nullptr);

struct DerppBatch {
    Tensor stream_x;
    std::vector<int> stream_y;
    Tensor mem_a_x;
    Tensor mem_a_logits;  ///< logits stored at insertion time
    Tensor mem_b_x;
    std::vector<int> mem_b_y;
};

/// CE(stream) + alpha_d * MSE(S(mem_a), stored_a) + beta_d * CE(S(mem_b), y_b).
/// Empty memory draws drop their terms.
LossBreakdown derpp_loss(const DerppBatch& batch, double alpha_d, double beta_d, const Classifier& student,
                         GradTape* tape = nullptr);

/// Asymmetric CE: stream rows see only current_classes in their softmax, memory
/// rows are unmasked. Mean over all rows of the combined batch.
LossBreakdown erace_loss(const Tensor& stream_x, std::span<const int> stream_y, const Tensor& mem_x,
                         std::span<const int> mem_y, std::span<const int> current_classes, const Classifier& student,
                         GradTape* tape = nullptr);

/// CE + lambda * KL(frozen || student) at temperature tau; CE only without a snapshot.
LossBreakdown snapshot_kd_loss(const Tensor& x, std::span<const int> y, const Classifier& student,
                               const Classifier* frozen_teacher, double lambda, double tau, GradTape* tape = nullptr);

/// Sum of a baseline objective and the MKD terms, component by component.
LossBreakdown compose(const LossBreakdown& base, const LossBreakdown& mkd);
LossBreakdown compose(double base, const LossBreakdown& mkd);

}  // namespace mkd
