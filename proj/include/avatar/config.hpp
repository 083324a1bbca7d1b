#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avatar/clustering.hpp"
#include "avatar/data.hpp"
#include "avatar/losses.hpp"
#include "avatar/models.hpp"
#include "avatar/objective.hpp"

namespace avatar {

enum class DatasetKind { two_moons, gaussian, directory };

struct DatasetSpec {
    DatasetKind kind = DatasetKind::two_moons;
    std::uint64_t seed = 7;
    // two_moons
    int n = 400;
    double rotation = 45.0;
    double noise = 0.1;
    // gaussian
    GaussianShiftSpec gaussian{};
    // directory
    std::filesystem::path path;
    std::string manifest = "manifest.csv";
    // optional imbalance protocol applied after generation/loading
    std::optional<ImbalanceSpec> imbalance;
};

enum class AuxiliaryScope { batch, dataset };

struct RunConfig {
    int epochs = 200;
    int warmup_epochs = 5;
    int batch_size = 64;
    int pretrain_epochs = 20;
    double learning_rate = 0.002;
    double task_lr_multiplier = 10.0;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
    Variant variant = Variant::avatar;

    FeatureExtractorSpec extractor{};
    ClassifierSpec classifier{};
    KMeansOptions kmeans{};
    AuxiliaryForm auxiliary_form = AuxiliaryForm::divide;
    AuxiliaryScope auxiliary_scope = AuxiliaryScope::batch;

    DatasetSpec dataset{};

    int checkpoint_every = 10;
    int early_stopping_patience = 0;  // 0 = off
    bool export_cluster_state = false;
    bool export_embeddings = false;
    std::filesystem::path output_dir = "runs";

    /// Throws ConfigError on violated invariants.
    void validate() const;
};

struct ExperimentSuite {
    std::string name = "suite";
    RunConfig base{};
    std::vector<Variant> variants{Variant::avatar};
    std::vector<std::uint64_t> seeds{1};
    /// One task per fraction when set; otherwise a single task.
    std::vector<double> imbalance_fractions;

    std::filesystem::path output_dir() const { return base.output_dir; }
};

/// Flat `key = value` settings; later entries win.
using Settings = std::vector<std::pair<std::string, std::string>>;

Settings read_settings_file(const std::filesystem::path& file);
Settings parse_settings(const std::string& text, const std::string& origin = "<string>");

/// Applies settings over defaults. Unknown keys, bad values, or violated invariants throw ConfigError.
ExperimentSuite build_suite(const Settings& settings);

/// Precedence, lowest to highest: built-in defaults, the file, AVATAR_OUTPUT_DIR, `overrides`.
ExperimentSuite parse_config(const std::filesystem::path& file, const Settings& overrides = {});

std::vector<std::string> known_config_keys();

/// Loads or generates the dataset described by `spec`.
DomainPair make_dataset(const DatasetSpec& spec);

/// Settings echo of a run configuration (for run directories).
std::string describe(const RunConfig& config);

}  // namespace avatar
