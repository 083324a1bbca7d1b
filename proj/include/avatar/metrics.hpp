#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "avatar/losses.hpp"
#include "avatar/models.hpp"

namespace avatar {

struct Evaluation {
    std::size_t count = 0;
    double accuracy = 0.0;
    /// NaN for classes absent from the evaluation labels.
    std::vector<double> per_class_accuracy;
    /// confusion[true][predicted]
    std::vector<std::vector<std::size_t>> confusion;
};

Evaluation evaluate_predictions(const Labels& predicted, const Labels& truth, int num_classes);

/// Class prediction is the argmax over the K class units.
Evaluation evaluate(const ModelPair& model, const Matrix& inputs, const Labels& truth);

/// Mean of per-class accuracies over `classes`, skipping classes that are absent (NaN).
double mean_class_accuracy(const Evaluation& eval, const std::vector<int>& classes);

/// Fraction of target samples whose cluster index equals their true class.
double cluster_purity(const Labels& assignments, const Labels& truth);

struct EpochRecord {
    int epoch = 0;
    double lambda = 0.0;
    double learning_rate = 0.0;
    double source_accuracy = 0.0;
    double target_accuracy = 0.0;  // NaN without target labels
    std::vector<double> per_class_accuracy;
    std::optional<double> minority_accuracy;
    double cluster_purity = 0.0;  // NaN without target labels
    std::vector<double> thresholds;
    double mean_threshold = 0.0;
    std::size_t positive_count = 0;
    std::size_t negative_count = 0;
    std::vector<int> empty_clusters;
    int kmeans_iterations = 0;
    bool kmeans_converged = false;
    std::size_t batches = 0;
    LossBreakdown losses;  // mean over the epoch's batches
};

nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

/// Append-only, one record per completed epoch.
class MetricsLog {
public:
    void append(EpochRecord record);
    const std::vector<EpochRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    std::string to_csv() const;
    std::string to_jsonl() const;
    void write_csv(const std::filesystem::path& file) const;
    void write_jsonl(const std::filesystem::path& file) const;

    static MetricsLog read_jsonl(const std::filesystem::path& file);

private:
    std::vector<EpochRecord> records_;
};

std::string csv_header_losses();
std::string csv_row_losses(const LossBreakdown& b);

}  // namespace avatar
