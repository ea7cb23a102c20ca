#include "mkd/momentum_teacher.hpp"

#include <cmath>
#include <stdexcept>

namespace mkd {

double lambda_of_alpha(double alpha) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("lambda_of_alpha: alpha must lie in (0, 1], got " + std::to_string(alpha));
    const double lam = 4.5 * std::log10(alpha) + 14.5;
    return lam < 0.0 ? 0.0 : lam;
}

void DistillConfig::validate() const {
    if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (lambda_override && !(*lambda_override >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
}

TeacherState::TeacherState(const Classifier& student, double alpha) : model_(student), alpha_(alpha) {
    // alpha = 0 (frozen teacher) is allowed here; only the loss weight rule needs alpha > 0.
    if (!(alpha >= 0.0) || alpha > 1.0) throw std::invalid_argument("teacher momentum must lie in [0, 1]");
}

void TeacherState::ema_update(std::span<const Scalar> student_params) {
    auto t = model_.params();
    if (student_params.size() != t.size())
        throw std::invalid_argument("ema_update: layout mismatch (" + std::to_string(student_params.size()) + " vs " +
                                    std::to_string(t.size()) + ")");
    const Scalar a = alpha_, keep = 1.0 - alpha_;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = a * student_params[i] + keep * t[i];
    ++n_updates_;
}

std::vector<Scalar> average_weights(std::span<const Scalar> student, std::span<const Scalar> teacher) {
    if (student.size() != teacher.size())
        throw std::invalid_argument("average_weights: layout mismatch (" + std::to_string(student.size()) + " vs " +
                                    std::to_string(teacher.size()) + ")");
    std::vector<Scalar> out(student.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (student[i] + teacher[i]);
    return out;
}

std::string to_string(InferenceMode m) {
    switch (m) {
        case InferenceMode::student: return "student";
        case InferenceMode::teacher: return "teacher";
        case InferenceMode::averaged: return "averaged";
    }
    return "?";
}

InferenceMode parse_inference_mode(const std::string& s) {
    if (s == "student") return InferenceMode::student;
    if (s == "teacher") return InferenceMode::teacher;
    if (s == "averaged") return InferenceMode::averaged;
    throw std::invalid_argument("unknown inference_mode '" + s + "' (expected student, teacher or averaged)");
}

Classifier inference_model(const Classifier& student, const TeacherState* teacher, InferenceMode mode) {
    if (!teacher || mode == InferenceMode::student) return student;
    if (mode == InferenceMode::teacher) return teacher->model();
    return Classifier(student.network(), average_weights(student.params(), teacher->params()));
}

}  // namespace mkd
