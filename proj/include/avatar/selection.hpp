#pragma once

#include <optional>

#include "avatar/tensor.hpp"

namespace avatar {

struct SelectionState {
    Vector cluster_means;  // w-bar_k
    Vector thresholds;     // tau_k
    Mask positive;         // per target sample
    std::size_t positive_count = 0;
    std::size_t negative_count = 0;
};

/// Mean weight of cluster k; empty optional when the cluster has no members.
std::optional<double> cluster_weight_mean(const Vector& weights, const Labels& assignments, int k);

/// Mean minus population standard deviation of cluster k's weights. The radicand is clamped at 0.
std::optional<double> cluster_threshold(const Vector& weights, const Labels& assignments, int k);

/// positive[i] <=> w[i] >= tau[assignment[i]] (inclusive boundary).
Mask partition_targets(const Vector& weights, const Labels& assignments, const Vector& thresholds);

/// Refreshes means and thresholds for every non-empty cluster; empty clusters keep the values
/// in `previous` (zeros when there is none).
SelectionState update_selection(const Vector& weights, const Labels& assignments, int num_clusters,
                                const SelectionState* previous);

/// Warm-up state: tau = 0 for every cluster, so every sample is positive.
SelectionState warmup_selection(const Vector& weights, const Labels& assignments, int num_clusters);

}  // namespace avatar
