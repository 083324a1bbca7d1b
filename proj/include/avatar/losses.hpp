#pragma once

#include <string>
#include <string_view>

#include "avatar/tensor.hpp"

namespace avatar {

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] inside every log.
inline constexpr double kProbFloor = 1e-7;

// divide: q ∝ p' / sqrt(column mass). multiply: q ∝ p' * sqrt(column mass), row-normalized.
enum class AuxiliaryForm { divide, multiply };

AuxiliaryForm parse_auxiliary_form(std::string_view name);
std::string to_string(AuxiliaryForm f);

/// Closed-form soft pseudo-labels from normalized class probabilities (N x K).
/// A class with zero column mass gets score 0 in every row.
Matrix update_auxiliary_distribution(const Matrix& class_probs, AuxiliaryForm form = AuxiliaryForm::divide);

/// Same update with the per-class mass supplied externally (e.g. summed over the whole target set).
Matrix update_auxiliary_distribution(const Matrix& class_probs, const RowVector& column_mass,
                                     AuxiliaryForm form = AuxiliaryForm::divide);

// The optional gradient outputs below are derivatives of the returned value with respect to
// the probability arguments; they are zero wherever the clamp is active.

/// Discriminator side: source pushed toward domain unit 1, target toward 0.
double adversarial_loss_g(const Vector& p_dom_s, const Vector& w_s, const Vector& p_dom_t,
                          const Vector& w_t, Vector* grad_s = nullptr, Vector* grad_t = nullptr);

/// Extractor side: domain labels flipped relative to adversarial_loss_g.
double adversarial_loss_f(const Vector& p_dom_s, const Vector& w_s, const Vector& p_dom_t,
                          const Vector& w_t, Vector* grad_s = nullptr, Vector* grad_t = nullptr);

/// Selection-aware soft cross-entropy on the target batch:
///   -(1/N) sum_i [ pos_i * w_i * sum_k q_ik log p'_ik + (1 - pos_i) * (1 - w_i) * sum_k q_ik log(1 - p'_ik) ]
/// With every sample positive this is the plain weighted soft-label cross-entropy.
double discriminative_target_loss(const Matrix& class_probs, const Matrix& q, const Vector& w_t,
                                  const Mask& positive, Matrix* grad = nullptr);

/// Same, with the positive mask derived from thresholds: pos_i <=> w_i >= tau[assignment_i].
double discriminative_target_loss(const Matrix& class_probs, const Matrix& q, const Vector& w_t,
                                  const Labels& assignments, const Vector& thresholds,
                                  Matrix* grad = nullptr);

/// Weighted source cross-entropy: -(1/N) sum_i w_i log p'_{i, y_i}.
double discriminative_source_loss(const Matrix& class_probs, const Labels& labels, const Vector& w_s,
                                  Matrix* grad = nullptr);

struct LossBreakdown {
    double adv_g = 0.0;
    double adv_f = 0.0;
    double dis_t = 0.0;
    double dis_s = 0.0;
    double dis = 0.0;
    double total_f = 0.0;
    double total_g = 0.0;
    double lambda = 0.0;
};

/// dis = dis_t + dis_s; total_f = lambda (dis + adv_f); total_g = lambda (dis + adv_g).
LossBreakdown total_objectives(double adv_g, double adv_f, double dis_t, double dis_s, double lambda);

/// 2 / (1 + exp(-10 p)) - 1, with p clamped to [0, 1].
double lambda_schedule(double progress);

}  // namespace avatar
