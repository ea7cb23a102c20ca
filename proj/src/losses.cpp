#include "mkd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mkd {

namespace {

void require_2d(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw std::invalid_argument(std::string(what) + " must be [B, C], got " + t.shape_string());
}

void check_labels(const Tensor& logits, std::span<const int> labels) {
    require_2d(logits, "logits");
    if (logits.rows() != labels.size())
        throw std::invalid_argument("logits rows (" + std::to_string(logits.rows()) + ") != labels (" +
                                    std::to_string(labels.size()) + ")");
    const auto c = static_cast<int>(logits.dim(1));
    for (int y : labels)
        if (y < 0 || y >= c) throw std::invalid_argument("label " + std::to_string(y) + " out of range");
}

// log-softmax of one row over the entries with allowed[j] != 0 (all when allowed is empty)
void log_softmax_row(const Scalar* row, std::size_t c, std::span<const char> allowed, Scalar* out) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t j = 0; j < c; ++j)
        if (allowed.empty() || allowed[j]) mx = std::max(mx, row[j]);
    Scalar sum = 0.0;
    for (std::size_t j = 0; j < c; ++j)
        if (allowed.empty() || allowed[j]) sum += std::exp(row[j] - mx);
    const Scalar lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j)
        out[j] = (allowed.empty() || allowed[j]) ? row[j] - lse : -std::numeric_limits<Scalar>::infinity();
}

void add_into(Tensor& acc, const Tensor& t, double s = 1.0) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s * t[i];
}

}  // namespace

Tensor softmax(const Tensor& logits, double tau) {
    require_2d(logits, "logits");
    Tensor out(logits.shape());
    const std::size_t c = logits.dim(1);
    std::vector<Scalar> tmp(c);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        for (std::size_t j = 0; j < c; ++j) tmp[j] = logits.at(r, j) / tau;
        log_softmax_row(tmp.data(), c, {}, out.data() + r * c);
        for (std::size_t j = 0; j < c; ++j) out.at(r, j) = std::exp(out.at(r, j));
    }
    return out;
}

LossGrad cross_entropy(const Tensor& logits, std::span<const int> labels) {
    return masked_cross_entropy(logits, labels, {}, {});
}

LossGrad masked_cross_entropy(const Tensor& logits, std::span<const int> labels, std::span<const char> restrict_row,
                              std::span<const char> allowed_classes) {
    check_labels(logits, labels);
    const std::size_t b = logits.rows(), c = logits.dim(1);
    if (b == 0) throw std::invalid_argument("cross-entropy of an empty batch");
    if (!restrict_row.empty() && restrict_row.size() != b) throw std::invalid_argument("restrict_row size mismatch");
    if (!restrict_row.empty() && allowed_classes.size() != c) throw std::invalid_argument("class mask size mismatch");
    LossGrad out{0.0, Tensor(logits.shape())};
    std::vector<Scalar> ls(c);
    const Scalar inv_b = 1.0 / static_cast<Scalar>(b);
    for (std::size_t r = 0; r < b; ++r) {
        const bool masked = !restrict_row.empty() && restrict_row[r];
        if (masked && !allowed_classes[static_cast<std::size_t>(labels[r])])
            throw std::invalid_argument("masked row label is not among the allowed classes");
        log_softmax_row(logits.data() + r * c, c, masked ? allowed_classes : std::span<const char>{}, ls.data());
        out.value -= ls[static_cast<std::size_t>(labels[r])];
        for (std::size_t j = 0; j < c; ++j) {
            const Scalar p = std::isinf(ls[j]) ? 0.0 : std::exp(ls[j]);
            out.grad.at(r, j) = (p - (static_cast<int>(j) == labels[r] ? 1.0 : 0.0)) * inv_b;
        }
    }
    out.value *= inv_b;
    return out;
}

LossGrad kl_distill_with_grad(const Tensor& teacher_logits, const Tensor& student_logits, double tau) {
    require_2d(teacher_logits, "teacher logits");
    require_2d(student_logits, "student logits");
    if (teacher_logits.shape() != student_logits.shape())
        throw std::invalid_argument("kl_distill: shape mismatch " + teacher_logits.shape_string() + " vs " +
                                    student_logits.shape_string());
    if (!(tau > 0.0)) throw std::invalid_argument("kl_distill: tau must be positive");
    const std::size_t b = student_logits.rows(), c = student_logits.dim(1);
    LossGrad out{0.0, Tensor(student_logits.shape())};
    if (b == 0) return out;
    std::vector<Scalar> t(c), s(c), lp(c), lq(c);
    const Scalar inv_b = 1.0 / static_cast<Scalar>(b);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
            t[j] = teacher_logits.at(r, j) / tau;
            s[j] = student_logits.at(r, j) / tau;
        }
        log_softmax_row(t.data(), c, {}, lp.data());
        log_softmax_row(s.data(), c, {}, lq.data());
        Scalar kl = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const Scalar p = std::exp(lp[j]);
            if (p > 0.0) kl += p * (lp[j] - lq[j]);
            out.grad.at(r, j) = (std::exp(lq[j]) - p) / tau * inv_b;
        }
        out.value += std::max<Scalar>(kl, 0.0);
    }
    out.value *= inv_b;
    return out;
}

double kl_distill(const Tensor& teacher_logits, const Tensor& student_logits, double tau) {
    return kl_distill_with_grad(teacher_logits, student_logits, tau).value;
}

LossGrad mse(const Tensor& prediction, const Tensor& target) {
    if (prediction.shape() != target.shape())
        throw std::invalid_argument("mse: shape mismatch " + prediction.shape_string() + " vs " + target.shape_string());
    LossGrad out{0.0, Tensor(prediction.shape())};
    if (prediction.size() == 0) return out;
    const Scalar inv_n = 1.0 / static_cast<Scalar>(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const Scalar d = prediction[i] - target[i];
        out.value += d * d;
        out.grad[i] = 2.0 * d * inv_n;
    }
    out.value *= inv_n;
    return out;
}

double er_loss(const Tensor& batch_logits, std::span<const int> labels) {
    return cross_entropy(batch_logits, labels).value;
}

void GradTape::record(ForwardTrace trace, Tensor grad_logits) {
    if (grad_logits.shape() != trace.logits.shape()) throw std::invalid_argument("GradTape: gradient shape mismatch");
    entries_.push_back({std::move(trace), std::move(grad_logits)});
}

void GradTape::backward(const Classifier& student, std::span<Scalar> grad) const {
    for (const auto& e : entries_) student.backward(e.trace, e.grad, grad);
}

LossBreakdown er_objective(const Classifier& student, const Tensor& x, std::span<const int> y, GradTape* tape) {
    auto trace = student.forward_train(x);
    auto ce = cross_entropy(trace.logits, y);
    if (tape) tape->record(std::move(trace), std::move(ce.grad));
    return {ce.value, ce.value, 0.0, 0.0};
}

LossBreakdown mkd_loss(const Tensor& x_raw, const Tensor& x_aug, std::span<const int> y, const Classifier& student,
                       const Classifier& teacher, const DistillConfig& cfg, GradTape* tape) {
    if (x_raw.shape() != x_aug.shape()) throw std::invalid_argument("mkd_loss: raw and augmented views differ in shape");
    const double lam = cfg.lambda();
    auto trace = student.forward_train(x_aug);
    auto ce = cross_entropy(trace.logits, y);
    LossBreakdown out{0.0, ce.value, 0.0, 0.0};
    Tensor grad = std::move(ce.grad);
    if (lam != 0.0) {
        const Tensor t_raw = teacher.forward(x_raw);
        const Tensor t_aug = teacher.forward(x_aug);
        auto kl_raw = kl_distill_with_grad(t_raw, trace.logits, cfg.tau);
        auto kl_aug = kl_distill_with_grad(t_aug, trace.logits, cfg.tau);
        out.distill = 0.5 * lam * kl_raw.value + 0.5 * lam * kl_aug.value;
        add_into(grad, kl_raw.grad, 0.5 * lam);
        add_into(grad, kl_aug.grad, 0.5 * lam);
    }
    out.total = out.ce + out.distill;
    if (tape) tape->record(std::move(trace), std::move(grad));
    return out;
}

LossBreakdown mkd_loss_single_view(const Tensor& x_aug, std::span<const int> y, const Classifier& student,
                                   const Classifier& teacher, const DistillConfig& cfg, GradTape* tape) {
    const double lam = cfg.lambda();
    auto trace = student.forward_train(x_aug);
    auto ce = cross_entropy(trace.logits, y);
    LossBreakdown out{0.0, ce.value, 0.0, 0.0};
    Tensor grad = std::move(ce.grad);
    if (lam != 0.0) {
        auto kl = kl_distill_with_grad(teacher.forward(x_aug), trace.logits, cfg.tau);
        out.distill = lam * kl.value;
        add_into(grad, kl.grad, lam);
    }
    out.total = out.ce + out.distill;
    if (tape) tape->record(std::move(trace), std::move(grad));
    return out;
}

LossBreakdown derpp_loss(const DerppBatch& batch, double alpha_d, double beta_d, const Classifier& student,
                         GradTape* tape) {
    const std::size_t ns = batch.stream_x.rows(), na = batch.mem_a_x.rows(), nb = batch.mem_b_x.rows();
    if (batch.mem_a_logits.rows() != na) throw std::invalid_argument("derpp_loss: stored logits not aligned with mem_a");
    const Tensor* parts[] = {&batch.stream_x, &batch.mem_a_x, &batch.mem_b_x};
    auto trace = student.forward_train(concat_rows(parts));
    const Tensor& logits = trace.logits;
    Tensor grad(logits.shape());
    LossBreakdown out;

    auto ce = cross_entropy(logits.slice_rows(0, ns), batch.stream_y);
    out.ce = ce.value;
    std::copy(ce.grad.storage().begin(), ce.grad.storage().end(), grad.data());
    const std::size_t c = logits.dim(1);
    if (na > 0 && alpha_d != 0.0) {
        auto m = mse(logits.slice_rows(ns, ns + na), batch.mem_a_logits);
        out.baseline_extra += alpha_d * m.value;
        for (std::size_t i = 0; i < m.grad.size(); ++i) grad[ns * c + i] += alpha_d * m.grad[i];
    }
    if (nb > 0 && beta_d != 0.0) {
        auto cb = cross_entropy(logits.slice_rows(ns + na, ns + na + nb), batch.mem_b_y);
        out.baseline_extra += beta_d * cb.value;
        for (std::size_t i = 0; i < cb.grad.size(); ++i) grad[(ns + na) * c + i] += beta_d * cb.grad[i];
    }
    out.total = out.ce + out.baseline_extra;
    if (tape) tape->record(std::move(trace), std::move(grad));
    return out;
}

LossBreakdown erace_loss(const Tensor& stream_x, std::span<const int> stream_y, const Tensor& mem_x,
                         std::span<const int> mem_y, std::span<const int> current_classes, const Classifier& student,
                         GradTape* tape) {
    const std::size_t ns = stream_x.rows(), nm = mem_x.rows();
    auto trace = student.forward_train(concat_rows(stream_x, mem_x));
    const std::size_t c = trace.logits.dim(1);
    std::vector<char> allowed(c, 0);
    for (int k : current_classes) {
        if (k < 0 || static_cast<std::size_t>(k) >= c) throw std::invalid_argument("current class out of range");
        allowed[static_cast<std::size_t>(k)] = 1;
    }
    std::vector<char> restrict_row(ns + nm, 0);
    std::fill_n(restrict_row.begin(), ns, 1);
    std::vector<int> labels(stream_y.begin(), stream_y.end());
    labels.insert(labels.end(), mem_y.begin(), mem_y.end());
    auto ce = masked_cross_entropy(trace.logits, labels, restrict_row, allowed);
    if (tape) tape->record(std::move(trace), std::move(ce.grad));
    return {ce.value, ce.value, 0.0, 0.0};
}

LossBreakdown snapshot_kd_loss(const Tensor& x, std::span<const int> y, const Classifier& student,
                               const Classifier* frozen_teacher, double lambda, double tau, GradTape* tape) {
    auto trace = student.forward_train(x);
    auto ce = cross_entropy(trace.logits, y);
    LossBreakdown out{ce.value, ce.value, 0.0, 0.0};
    Tensor grad = std::move(ce.grad);
    if (frozen_teacher && lambda != 0.0) {
        auto kl = kl_distill_with_grad(frozen_teacher->forward(x), trace.logits, tau);
        out.distill = lambda * kl.value;
        add_into(grad, kl.grad, lambda);
        out.total += out.distill;
    }
    if (tape) tape->record(std::move(trace), std::move(grad));
    return out;
}

LossBreakdown compose(const LossBreakdown& base, const LossBreakdown& mkd) {
    return {base.total + mkd.total, base.ce + mkd.ce, base.distill + mkd.distill,
            base.baseline_extra + mkd.baseline_extra};
}

LossBreakdown compose(double base, const LossBreakdown& mkd) { return compose(LossBreakdown{base, base, 0.0, 0.0}, mkd); }

}  // namespace mkd
