#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "avatar/tensor.hpp"

namespace avatar {

// cosine: linear kernel on L2-normalized embeddings (spherical K-means).
enum class KernelKind { linear, cosine, rbf };

KernelKind parse_kernel(std::string_view name);
std::string to_string(KernelKind k);

struct KernelSpec {
    KernelKind kind = KernelKind::cosine;
    double rbf_gamma = 1.0;  // k(x, y) = exp(-gamma * |x - y|^2)
};

struct KMeansOptions {
    KernelSpec kernel{};
    int max_iterations = 100;
};

struct KMeansResult {
    /// Explicit centroids in embedding space. For the cosine kernel these are means of the
    /// normalized members; for rbf, the arithmetic mean of the raw members.
    Matrix centroids;
    Labels assignments;
    /// Objective after the initial assignment and after every iteration.
    std::vector<double> objective_history;
    int iterations = 0;
    bool converged = false;
    /// Clusters left without members; they keep their fallback centroid.
    std::vector<int> empty_clusters;
};

/// Lloyd iterations in kernel feature space. Cluster k starts at init_centroids row k, so it
/// keeps that row's class identity. An empty cluster is represented by the matching row of
/// `fallback_centroids` (defaults to the init centroids). Converged means no label changed.
KMeansResult kernel_kmeans(const Matrix& embeddings, int num_clusters, const Matrix& init_centroids,
                           const KMeansOptions& options = {},
                           const Matrix* fallback_centroids = nullptr);

/// Centroid k is the mean embedding of samples whose argmax class unit is k. A class with no
/// argmax samples falls back to the probability-weighted mean; zero total mass throws
/// DegenerateInputError.
Matrix init_centroids_from_classifier(const Matrix& embeddings, const Matrix& probs);

/// 0.5 * (1 + cos(z, c)), clamped to [0, 1]. Zero-norm input yields 0.5 with a warning.
double cosine_weight(const RowVector& z, const RowVector& c);

Vector compute_source_weights(const Matrix& embeddings, const Labels& labels, const Matrix& centroids);
Vector compute_target_weights(const Matrix& embeddings, const Labels& assignments,
                              const Matrix& centroids);

struct ClusterState {
    Matrix centroids;
    Labels assignments;
    Vector source_weights;
    Vector target_weights;
    std::vector<int> empty_clusters;
    int kmeans_iterations = 0;
    bool kmeans_converged = false;
};

}  // namespace avatar
