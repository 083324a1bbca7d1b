#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avatar/tensor.hpp"

namespace avatar {

struct LabeledDataset {
    Matrix inputs;
    Labels labels;
};

struct UnlabeledDataset {
    Matrix inputs;
};

/// Source and target share the class vocabulary [0, K). Target labels, when known, are kept
/// apart from the training data and only read by evaluation.
struct DomainPair {
    LabeledDataset source;
    UnlabeledDataset target;
    std::optional<Labels> target_eval_labels;
    int num_classes = 0;
    std::vector<std::string> class_names;

    int input_dim() const { return static_cast<int>(source.inputs.cols()); }
};

/// Centered two-moons; the target draws from the same generator rotated about the origin.
DomainPair make_two_moons_shift(int n_per_domain, double rotation_degrees, double noise, std::uint64_t seed);

struct GaussianShiftSpec {
    int num_classes = 3;
    int n_per_domain = 300;
    std::vector<double> shift{};  // target translation; its length sets the input dimension
    double sigma = 1.0;           // isotropic standard deviation
    double separation = 4.0;      // class k is centered at separation * e_k
};

DomainPair make_gaussian_shift(const GaussianShiftSpec& spec, std::uint64_t seed);

struct ImbalanceSpec {
    int majority_class = 0;
    double minority_fraction = 0.1;
    double source_downsample = 0.9;  // fraction of each source class removed
};

/// round-half-up(fraction * majority), at least 1.
std::size_t minority_size(std::size_t majority_count, double fraction);

/// 0.10, 0.09, ..., 0.01.
std::vector<double> imbalance_fractions();

/// Shrinks every non-majority target class to minority_size(...) and keeps
/// round-half-up((1 - rate) * n_c) (at least 1) samples of each source class.
DomainPair make_imbalanced(const DomainPair& pair, const ImbalanceSpec& spec, std::uint64_t seed);

/// CSV manifest with header `path,domain,label`; each path names a text file of numbers
/// (whitespace or comma separated). Target labels may be empty.
DomainPair load_directory_dataset(const std::filesystem::path& root, const std::string& manifest = "manifest.csv");

void export_directory_dataset(const DomainPair& pair, const std::filesystem::path& root);

std::vector<std::size_t> class_counts(const Labels& labels, int num_classes);

}  // namespace avatar
