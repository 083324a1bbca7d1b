#pragma once

#include <filesystem>
#include <functional>
#include <optional>

#include "avatar/clustering.hpp"
#include "avatar/config.hpp"
#include "avatar/data.hpp"
#include "avatar/metrics.hpp"
#include "avatar/models.hpp"
#include "avatar/objective.hpp"
#include "avatar/selection.hpp"

namespace avatar {

struct EpochContext {
    int epoch;
    bool warmup;
    const ClusterState& cluster;
    const SelectionState& selection;
};

struct BatchContext {
    int epoch;
    std::size_t batch;
    bool warmup;
    const ObjectiveTerms& terms;
    const ForwardPass& forward;
    const BatchTargets& targets;
    const Labels& target_assignments;  // cluster indices of the batch's target rows
    const Vector& thresholds;
    const LossBreakdown& losses;
};

/// Read-only observation points; called on the training thread.
struct TrainHooks {
    std::function<void(const EpochContext&)> on_epoch_start;
    std::function<void(const BatchContext&)> on_batch;
};

struct TrainResult {
    ModelPair model;
    MetricsLog log;
    ClusterState cluster;
    SelectionState selection;
    bool early_stopped = false;
};

/// Seeded fan-in uniform initialization sized for `pair`.
ModelPair initial_model(const RunConfig& config, const DomainPair& pair);

/// Unweighted source cross-entropy on both networks for `epochs` epochs.
ModelPair pretrain_source(const RunConfig& config, const DomainPair& pair, ModelPair model, int epochs);

/// initial_model followed by config.pretrain_epochs of source training.
ModelPair pretrain_source(const RunConfig& config, const DomainPair& pair);

/// Embeds both domains, initializes centroids from classifier class means, runs kernel
/// K-means on the target, and computes instance weights for both domains.
ClusterState refresh_cluster_state(const ModelPair& model, const DomainPair& pair, const KMeansOptions& options,
                                   const Matrix* previous_centroids = nullptr);

/// Adaptation loop starting from `initial`. Writes artifacts under `run_dir` when non-empty.
TrainResult train(const RunConfig& config, const DomainPair& pair, const ModelPair& initial,
                  const std::filesystem::path& run_dir = {}, const TrainHooks& hooks = {});

/// pretrain_source + train.
TrainResult train(const RunConfig& config, const DomainPair& pair, const std::filesystem::path& run_dir = {},
                  const TrainHooks& hooks = {});

/// Classes other than the imbalance majority class (empty without an imbalance spec).
std::vector<int> minority_classes(const RunConfig& config, int num_classes);

/// Columns: sample_id, domain, label (source) or assignment (target), weight, z_0..z_{d-1}.
void write_embeddings_csv(const std::filesystem::path& file, const ModelPair& model, const DomainPair& pair,
                          const ClusterState& cluster);

void write_cluster_state(const std::filesystem::path& dir, int epoch, const ClusterState& cluster,
                         const SelectionState& selection);

}  // namespace avatar
