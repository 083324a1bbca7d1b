#include "avatar/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

namespace avatar {

KernelKind parse_kernel(std::string_view name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "cosine" || name == "spherical") return KernelKind::cosine;
    if (name == "rbf") return KernelKind::rbf;
    throw ConfigError("unknown kernel '" + std::string(name) + "' (expected linear, cosine, rbf)");
}

std::string to_string(KernelKind k) {
    switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::cosine: return "cosine";
    case KernelKind::rbf: return "rbf";
    }
    return "cosine";
}

namespace {

constexpr double kNormFloor = 1e-12;

Matrix normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) /= std::max(out.row(i).norm(), kNormFloor);
    return out;
}

// Squared feature-space distances, N x K. Each cluster is either the mean of its members or,
// when it has none, the explicit anchor vector.
class FeatureSpace {
public:
    FeatureSpace(const Matrix& points, const KernelSpec& spec) : spec_(spec) {
        if (spec.kind == KernelKind::cosine)
            points_ = normalize_rows(points);
        else
            points_ = points;
        if (spec.kind == KernelKind::rbf) {
            const Eigen::Index n = points_.rows();
            gram_.resize(n, n);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = i; j < n; ++j) gram_(i, j) = gram_(j, i) = rbf(points_.row(i), points_.row(j));
        }
    }

    Eigen::Index size() const { return points_.rows(); }
    const Matrix& points() const { return points_; }

    Matrix distances(const Labels& labels, const Matrix& anchors, int k) const {
        const Eigen::Index n = size();
        std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
        if (!labels.empty())
            for (Eigen::Index i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);

        Matrix d(n, k);
        if (spec_.kind != KernelKind::rbf) {
            const Matrix centers = explicit_centers(members, anchors);
            for (Eigen::Index i = 0; i < n; ++i)
                for (int c = 0; c < k; ++c) d(i, c) = (points_.row(i) - centers.row(c)).squaredNorm();
            return d;
        }
        for (int c = 0; c < k; ++c) {
            const auto& m = members[static_cast<std::size_t>(c)];
            if (m.empty()) {
                const RowVector a = anchors.row(c);
                for (Eigen::Index i = 0; i < n; ++i) d(i, c) = 2.0 - 2.0 * rbf(points_.row(i), a);
                continue;
            }
            double self = 0.0;
            for (auto j : m)
                for (auto l : m) self += gram_(j, l);
            self /= static_cast<double>(m.size() * m.size());
            for (Eigen::Index i = 0; i < n; ++i) {
                double cross = 0.0;
                for (auto j : m) cross += gram_(i, j);
                d(i, c) = gram_(i, i) - 2.0 * cross / static_cast<double>(m.size()) + self;
            }
        }
        return d;
    }

    Matrix explicit_centers(const std::vector<std::vector<Eigen::Index>>& members, const Matrix& anchors) const {
        Matrix centers(static_cast<Eigen::Index>(members.size()), points_.cols());
        for (std::size_t c = 0; c < members.size(); ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            if (members[c].empty()) {
                centers.row(ci) = anchor_in_space(anchors.row(ci));
                continue;
            }
            centers.row(ci).setZero();
            for (auto i : members[c]) centers.row(ci) += points_.row(i);
            centers.row(ci) /= static_cast<double>(members[c].size());
        }
        return centers;
    }

private:
    double rbf(const RowVector& a, const RowVector& b) const {
        return std::exp(-spec_.rbf_gamma * (a - b).squaredNorm());
    }

    RowVector anchor_in_space(const RowVector& a) const {
        if (spec_.kind == KernelKind::cosine) return a / std::max(a.norm(), kNormFloor);
        return a;
    }

    KernelSpec spec_;
    Matrix points_;
    Matrix gram_;
};

std::pair<Labels, double> assign_nearest(const Matrix& d, const Labels* previous) {
    Labels labels(static_cast<std::size_t>(d.rows()));
    double objective = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        // Keep the previous label on exact ties so a fixed point stays fixed.
        Eigen::Index best = 0;
        double best_d = d(i, 0);
        for (Eigen::Index c = 1; c < d.cols(); ++c)
            if (d(i, c) < best_d) {
                best_d = d(i, c);
                best = c;
            }
        if (previous) {
            const int prev = (*previous)[static_cast<std::size_t>(i)];
            if (d(i, prev) <= best_d) best = prev;
        }
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        objective += std::max(d(i, best), 0.0);
    }
    return {std::move(labels), objective};
}

}  // namespace

KMeansResult kernel_kmeans(const Matrix& embeddings, int num_clusters, const Matrix& init_centroids,
                           const KMeansOptions& options, const Matrix* fallback_centroids) {
    if (embeddings.rows() == 0) throw ArgumentError("kernel K-means needs a non-empty input");
    if (num_clusters < 1) throw ArgumentError("cluster count must be positive");
    if (embeddings.rows() < num_clusters) throw ArgumentError("fewer samples than clusters");
    if (init_centroids.rows() != num_clusters || init_centroids.cols() != embeddings.cols())
        throw ArgumentError("init centroids must be K x d");
    if (!init_centroids.allFinite()) throw ArgumentError("init centroids must be finite");
    const Matrix& anchors = fallback_centroids ? *fallback_centroids : init_centroids;
    if (anchors.rows() != num_clusters || anchors.cols() != embeddings.cols())
        throw ArgumentError("fallback centroids must be K x d");

    const FeatureSpace space(embeddings, options.kernel);
    KMeansResult result;

    auto [labels, objective] = assign_nearest(space.distances({}, init_centroids, num_clusters), nullptr);
    result.objective_history.push_back(objective);
    Labels best_labels = labels;
    double best_objective = objective;

    for (int it = 1; it <= options.max_iterations; ++it) {
        auto [next, next_objective] = assign_nearest(space.distances(labels, anchors, num_clusters), &labels);
        std::size_t changed = 0;
        for (std::size_t i = 0; i < next.size(); ++i) changed += next[i] != labels[i];
        labels = std::move(next);
        result.objective_history.push_back(next_objective);
        result.iterations = it;
        if (next_objective <= best_objective) {
            best_objective = next_objective;
            best_labels = labels;
        }
        if (changed == 0) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        spdlog::warn("kernel K-means did not converge in {} iterations", options.max_iterations);
        labels = best_labels;
    }

    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(num_clusters));
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
    for (int c = 0; c < num_clusters; ++c)
        if (members[static_cast<std::size_t>(c)].empty()) result.empty_clusters.push_back(c);

    if (options.kernel.kind == KernelKind::rbf) {
        // No explicit pre-image in feature space; use the raw member mean.
        result.centroids.resize(num_clusters, embeddings.cols());
        for (int c = 0; c < num_clusters; ++c) {
            const auto& m = members[static_cast<std::size_t>(c)];
            if (m.empty()) {
                result.centroids.row(c) = anchors.row(c);
                continue;
            }
            result.centroids.row(c).setZero();
            for (auto i : m) result.centroids.row(c) += embeddings.row(i);
            result.centroids.row(c) /= static_cast<double>(m.size());
        }
    } else {
        result.centroids = space.explicit_centers(members, anchors);
    }
    result.assignments = std::move(labels);
    return result;
}

Matrix init_centroids_from_classifier(const Matrix& embeddings, const Matrix& probs) {
    if (embeddings.rows() != probs.rows()) throw ArgumentError("embeddings and probabilities disagree in row count");
    const Eigen::Index k = probs.cols() - 1;
    if (k < 1) throw ArgumentError("probability rows need K+1 entries");
    Matrix centroids = Matrix::Zero(k, embeddings.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index best = 0;
        probs.row(i).head(k).maxCoeff(&best);
        centroids.row(best) += embeddings.row(i);
        ++counts[static_cast<std::size_t>(best)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
            centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
            continue;
        }
        const double mass = probs.col(c).sum();
        if (!(mass > 0.0)) throw DegenerateInputError("class " + std::to_string(c) + " has zero probability mass");
        centroids.row(c) = (probs.col(c).transpose() * embeddings) / mass;
    }
    return centroids;
}

double cosine_weight(const RowVector& z, const RowVector& c) {
    const double nz = z.norm();
    const double nc = c.norm();
    if (nz == 0.0 || nc == 0.0) {
        spdlog::warn("cosine weight of a zero-norm vector; using 0.5");
        return 0.5;
    }
    const double cos = z.dot(c) / (std::max(nz, kNormFloor) * std::max(nc, kNormFloor));
    return std::clamp(0.5 * (1.0 + cos), 0.0, 1.0);
}

namespace {

Vector weights_by_index(const Matrix& embeddings, const Labels& idx, const Matrix& centroids, const char* what) {
    if (static_cast<Eigen::Index>(idx.size()) != embeddings.rows())
        throw ArgumentError(std::string(what) + " count does not match embedding rows");
    Vector w(embeddings.rows());
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        const int k = idx[static_cast<std::size_t>(i)];
        if (k < 0 || k >= centroids.rows())
            throw ArgumentError(std::string(what) + " " + std::to_string(k) + " out of range at row " + std::to_string(i));
        w[i] = cosine_weight(embeddings.row(i), centroids.row(k));
    }
    return w;
}

}  // namespace

Vector compute_source_weights(const Matrix& embeddings, const Labels& labels, const Matrix& centroids) {
    return weights_by_index(embeddings, labels, centroids, "label");
}

Vector compute_target_weights(const Matrix& embeddings, const Labels& assignments, const Matrix& centroids) {
    return weights_by_index(embeddings, assignments, centroids, "assignment");
}

}  // namespace avatar
