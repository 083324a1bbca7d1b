#include "avatar/losses.hpp"

#include <algorithm>
#include <cmath>

namespace avatar {

AuxiliaryForm parse_auxiliary_form(std::string_view name) {
    if (name == "divide") return AuxiliaryForm::divide;
    if (name == "multiply") return AuxiliaryForm::multiply;
    throw ConfigError("unknown auxiliary form '" + std::string(name) + "' (expected divide, multiply)");
}

std::string to_string(AuxiliaryForm f) { return f == AuxiliaryForm::divide ? "divide" : "multiply"; }

namespace {

constexpr double kProbCeil = 1.0 - kProbFloor;

bool clamped(double p) { return p < kProbFloor || p > kProbCeil; }
double clamp_prob(double p) { return std::clamp(p, kProbFloor, kProbCeil); }

// -log(p) and its derivative in p.
double neg_log(double p, double* d) {
    if (d) *d = clamped(p) ? 0.0 : -1.0 / p;
    return -std::log(clamp_prob(p));
}

// -log(1 - p) and its derivative in p.
double neg_log1m(double p, double* d) {
    if (d) *d = clamped(p) ? 0.0 : 1.0 / (1.0 - p);
    return -std::log(1.0 - clamp_prob(p));
}

void check_lengths(const Vector& p, const Vector& w, const char* what) {
    if (p.size() != w.size()) throw ArgumentError(std::string(what) + ": probability and weight lengths differ");
}

// One term -(1/N) sum w_i log(p_i) (or log(1 - p_i) when `flip`).
double weighted_domain_term(const Vector& p, const Vector& w, bool flip, Vector* grad) {
    const auto n = p.size();
    if (grad) *grad = Vector::Zero(n);
    if (n == 0) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double d = 0.0;
        const double v = flip ? neg_log1m(p[i], grad ? &d : nullptr) : neg_log(p[i], grad ? &d : nullptr);
        total += w[i] * v;
        if (grad) (*grad)[i] = inv_n * w[i] * d;
    }
    return inv_n * total;
}

}  // namespace

Matrix update_auxiliary_distribution(const Matrix& class_probs, AuxiliaryForm form) {
    if (class_probs.rows() < 1) throw ArgumentError("auxiliary distribution needs at least one row");
    return update_auxiliary_distribution(class_probs, class_probs.colwise().sum(), form);
}

Matrix update_auxiliary_distribution(const Matrix& class_probs, const RowVector& mass, AuxiliaryForm form) {
    if (class_probs.rows() < 1) throw ArgumentError("auxiliary distribution needs at least one row");
    if (mass.size() != class_probs.cols()) throw ArgumentError("column mass length must equal K");
    RowVector scale(mass.size());
    for (Eigen::Index k = 0; k < mass.size(); ++k) {
        if (!(mass[k] > 0.0))
            scale[k] = 0.0;
        else
            scale[k] = form == AuxiliaryForm::divide ? 1.0 / std::sqrt(mass[k]) : std::sqrt(mass[k]);
    }
    Matrix q = class_probs.array().rowwise() * scale.array();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const double s = q.row(i).sum();
        if (!(s > 0.0)) throw DegenerateInputError("auxiliary distribution row " + std::to_string(i) + " has no mass");
        q.row(i) /= s;
    }
    return q;
}

double adversarial_loss_g(const Vector& p_dom_s, const Vector& w_s, const Vector& p_dom_t,
                          const Vector& w_t, Vector* grad_s, Vector* grad_t) {
    check_lengths(p_dom_s, w_s, "adversarial_loss_g");
    check_lengths(p_dom_t, w_t, "adversarial_loss_g");
    return weighted_domain_term(p_dom_s, w_s, false, grad_s) + weighted_domain_term(p_dom_t, w_t, true, grad_t);
}

double adversarial_loss_f(const Vector& p_dom_s, const Vector& w_s, const Vector& p_dom_t,
                          const Vector& w_t, Vector* grad_s, Vector* grad_t) {
    check_lengths(p_dom_s, w_s, "adversarial_loss_f");
    check_lengths(p_dom_t, w_t, "adversarial_loss_f");
    return weighted_domain_term(p_dom_s, w_s, true, grad_s) + weighted_domain_term(p_dom_t, w_t, false, grad_t);
}

double discriminative_target_loss(const Matrix& class_probs, const Matrix& q, const Vector& w_t,
                                  const Mask& positive, Matrix* grad) {
    const auto n = class_probs.rows();
    if (q.rows() != n || q.cols() != class_probs.cols() || w_t.size() != n ||
        static_cast<Eigen::Index>(positive.size()) != n)
        throw ArgumentError("discriminative_target_loss: shape mismatch");
    if (grad) *grad = Matrix::Zero(n, class_probs.cols());
    if (n == 0) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool pos = positive[static_cast<std::size_t>(i)];
        const double weight = pos ? w_t[i] : 1.0 - w_t[i];
        for (Eigen::Index k = 0; k < class_probs.cols(); ++k) {
            if (q(i, k) == 0.0) continue;
            double d = 0.0;
            const double v = pos ? neg_log(class_probs(i, k), &d) : neg_log1m(class_probs(i, k), &d);
            total += weight * q(i, k) * v;
            if (grad) (*grad)(i, k) = inv_n * weight * q(i, k) * d;
        }
    }
    return inv_n * total;
}

double discriminative_target_loss(const Matrix& class_probs, const Matrix& q, const Vector& w_t,
                                  const Labels& assignments, const Vector& thresholds, Matrix* grad) {
    Mask positive(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const int k = assignments[i];
        if (k < 0 || k >= thresholds.size()) throw ArgumentError("assignment out of threshold range");
        positive[i] = w_t[static_cast<Eigen::Index>(i)] >= thresholds[k];
    }
    return discriminative_target_loss(class_probs, q, w_t, positive, grad);
}

double discriminative_source_loss(const Matrix& class_probs, const Labels& labels, const Vector& w_s,
                                  Matrix* grad) {
    const auto n = class_probs.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n || w_s.size() != n)
        throw ArgumentError("discriminative_source_loss: shape mismatch");
    if (grad) *grad = Matrix::Zero(n, class_probs.cols());
    if (n == 0) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= class_probs.cols())
            throw ArgumentError("label " + std::to_string(y) + " out of range at row " + std::to_string(i));
        double d = 0.0;
        total += w_s[i] * neg_log(class_probs(i, y), &d);
        if (grad) (*grad)(i, y) = inv_n * w_s[i] * d;
    }
    return inv_n * total;
}

LossBreakdown total_objectives(double adv_g, double adv_f, double dis_t, double dis_s, double lambda) {
    if (lambda < 0.0) throw ArgumentError("lambda must be nonnegative");
    LossBreakdown b;
    b.adv_g = adv_g;
    b.adv_f = adv_f;
    b.dis_t = dis_t;
    b.dis_s = dis_s;
    b.dis = dis_t + dis_s;
    b.lambda = lambda;
    b.total_f = lambda * (b.dis + adv_f);
    b.total_g = lambda * (b.dis + adv_g);
    return b;
}

double lambda_schedule(double progress) {
    const double p = std::clamp(progress, 0.0, 1.0);
    return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

}  // namespace avatar
