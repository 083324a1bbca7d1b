#include "avatar/selection.hpp"

#include <algorithm>
#include <cmath>

namespace avatar {

namespace {

struct Moments {
    std::size_t n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
};

Moments cluster_moments(const Vector& weights, const Labels& assignments, int k) {
    if (static_cast<Eigen::Index>(assignments.size()) != weights.size())
        throw ArgumentError("weights and assignments differ in length");
    Moments m;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] != k) continue;
        const double w = weights[static_cast<Eigen::Index>(i)];
        ++m.n;
        m.sum += w;
        m.sum_sq += w * w;
    }
    return m;
}

}  // namespace

std::optional<double> cluster_weight_mean(const Vector& weights, const Labels& assignments, int k) {
    const Moments m = cluster_moments(weights, assignments, k);
    if (m.n == 0) return std::nullopt;
    return m.sum / static_cast<double>(m.n);
}

std::optional<double> cluster_threshold(const Vector& weights, const Labels& assignments, int k) {
    const Moments m = cluster_moments(weights, assignments, k);
    if (m.n == 0) return std::nullopt;
    const double n = static_cast<double>(m.n);
    const double mean = m.sum / n;
    const double radicand = std::max(m.sum_sq / n - mean * mean, 0.0);
    return mean - std::sqrt(radicand);
}

Mask partition_targets(const Vector& weights, const Labels& assignments, const Vector& thresholds) {
    if (static_cast<Eigen::Index>(assignments.size()) != weights.size())
        throw ArgumentError("weights and assignments differ in length");
    Mask positive(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const int k = assignments[i];
        if (k < 0 || k >= thresholds.size()) throw ArgumentError("assignment out of threshold range");
        positive[i] = weights[static_cast<Eigen::Index>(i)] >= thresholds[k];
    }
    return positive;
}

namespace {

void count(SelectionState& s) {
    s.positive_count = static_cast<std::size_t>(std::count(s.positive.begin(), s.positive.end(), true));
    s.negative_count = s.positive.size() - s.positive_count;
}

}  // namespace

SelectionState update_selection(const Vector& weights, const Labels& assignments, int num_clusters,
                                const SelectionState* previous) {
    SelectionState s;
    s.cluster_means = previous ? previous->cluster_means : Vector::Zero(num_clusters);
    s.thresholds = previous ? previous->thresholds : Vector::Zero(num_clusters);
    for (int k = 0; k < num_clusters; ++k) {
        if (auto mean = cluster_weight_mean(weights, assignments, k)) s.cluster_means[k] = *mean;
        if (auto tau = cluster_threshold(weights, assignments, k)) s.thresholds[k] = *tau;
    }
    s.positive = partition_targets(weights, assignments, s.thresholds);
    count(s);
    return s;
}

SelectionState warmup_selection(const Vector& weights, const Labels& assignments, int num_clusters) {
    SelectionState s;
    s.cluster_means = Vector::Zero(num_clusters);
    for (int k = 0; k < num_clusters; ++k)
        if (auto mean = cluster_weight_mean(weights, assignments, k)) s.cluster_means[k] = *mean;
    s.thresholds = Vector::Zero(num_clusters);
    s.positive = partition_targets(weights, assignments, s.thresholds);
    count(s);
    return s;
}

}  // namespace avatar
