#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mkd/model.hpp"
#include "mkd/tensor.hpp"

namespace mkd {

/// Weight of the distillation term as a function of the teacher momentum:
/// 4.5 * log10(alpha) + 14.5, clamped at 0. Throws for alpha outside (0, 1].
double lambda_of_alpha(double alpha);

struct DistillConfig {
    double alpha = 0.01;
    /// When unset, lambda_of_alpha(alpha) is used.
    std::optional<double> lambda_override;
    double tau = 4.0;
    bool multiview = true;

    double lambda() const { return lambda_override ? *lambda_override : lambda_of_alpha(alpha); }
    void validate() const;
};

/// Exponential moving average of the student's parameters.
class TeacherState {
public:
    /// Starts as an exact copy of the student.
    TeacherState(const Classifier& student, double alpha);

    /// theta_T <- alpha * theta_S + (1 - alpha) * theta_T, elementwise.
    void ema_update(std::span<const Scalar> student_params);

    double alpha() const noexcept { return alpha_; }
    std::uint64_t n_updates() const noexcept { return n_updates_; }
    std::span<const Scalar> params() const noexcept { return model_.params(); }
    /// The teacher as an evaluable network (same architecture as the student).
    const Classifier& model() const noexcept { return model_; }

private:
    Classifier model_;
    double alpha_;
    std::uint64_t n_updates_ = 0;
};

/// Elementwise mean of two parameter vectors of identical layout.
std::vector<Scalar> average_weights(std::span<const Scalar> student, std::span<const Scalar> teacher);

enum class InferenceMode { student, teacher, averaged };

std::string to_string(InferenceMode m);
InferenceMode parse_inference_mode(const std::string& s);

/// Network used for evaluation under a given inference mode. Teacher-based
/// modes need a teacher; without one they fall back to the student.
Classifier inference_model(const Classifier& student, const TeacherState* teacher, InferenceMode mode);

}  // namespace mkd
