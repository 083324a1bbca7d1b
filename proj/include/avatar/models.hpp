#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "avatar/tensor.hpp"

namespace avatar {

enum class Activation { identity, tanh, relu, softplus };

Activation parse_activation(std::string_view name);
std::string to_string(Activation a);

/// y = x W^T + b, with W stored as (out x in).
struct DenseLayer {
    Matrix weight;
    Vector bias;
};

/// Per-layer parameter gradients; same shapes as the layers they belong to.
using LayerGrads = std::vector<DenseLayer>;

struct MlpCache {
    std::vector<Matrix> inputs;  // activation entering layer l
    std::vector<Matrix> pre;     // pre-activation of layer l
};

/// Fully connected network. Hidden layers apply `activation`; the output layer is linear.
class Mlp {
public:
    Mlp() = default;
    Mlp(std::vector<int> widths, Activation activation);

    /// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    void init_uniform(std::mt19937_64& rng);

    Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const;

    /// Returns dL/dx; writes parameter gradients into `grads` when non-null.
    Matrix backward(const MlpCache& cache, const Matrix& grad_out, LayerGrads* grads) const;

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    const std::vector<int>& widths() const { return widths_; }
    Activation activation() const { return activation_; }

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    std::size_t parameter_count() const;
    Vector flat_parameters() const;
    void set_flat_parameters(const Vector& flat);

private:
    std::vector<int> widths_;
    Activation activation_ = Activation::tanh;
    std::vector<DenseLayer> layers_;
};

LayerGrads zero_grads_like(const std::vector<DenseLayer>& layers);
Vector flatten(const LayerGrads& grads);

struct FeatureExtractorSpec {
    int input_dim = 2;
    std::vector<int> hidden{128, 128};
    int embedding_dim = 64;
    Activation activation = Activation::tanh;
};

/// f: input -> embedding z in R^d.
class FeatureExtractor {
public:
    FeatureExtractor() = default;
    explicit FeatureExtractor(const FeatureExtractorSpec& spec);

    const FeatureExtractorSpec& spec() const { return spec_; }
    int embedding_dim() const { return spec_.embedding_dim; }

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

private:
    FeatureExtractorSpec spec_;
    Mlp net_;
};

struct ClassifierSpec {
    int num_classes = 2;
    std::vector<int> hidden{};
    Activation activation = Activation::tanh;
};

/// g: embedding -> K+1 softmax units; the last unit is the domain unit
/// (probability that the input comes from the source domain).
class JointDiscriminatorClassifier {
public:
    JointDiscriminatorClassifier() = default;
    JointDiscriminatorClassifier(int embedding_dim, const ClassifierSpec& spec);

    int num_classes() const { return spec_.num_classes; }
    const ClassifierSpec& spec() const { return spec_; }

    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

private:
    ClassifierSpec spec_;
    Mlp net_;
};

struct ModelPair {
    FeatureExtractor extractor;
    JointDiscriminatorClassifier classifier;
};

ModelPair make_model_pair(const FeatureExtractorSpec& f_spec, const ClassifierSpec& g_spec,
                          std::uint64_t seed);

/// z_i = f(x_i). Throws ConfigError on width mismatch.
Matrix extract_features(const FeatureExtractor& model, const Matrix& batch,
                        MlpCache* cache = nullptr);

/// Row-wise (K+1)-way softmax of g(z). Throws NumericError naming the first non-finite row.
Matrix classify(const JointDiscriminatorClassifier& model, const Matrix& z,
                MlpCache* cache = nullptr);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// p'_k = p_k / sum_{k'<K} p_k' over the K class units; the domain unit is dropped.
Vector normalize_class_probs(const Vector& p);
Matrix normalize_class_probs(const Matrix& p);

/// argmax over the K class units.
Labels predict_classes(const Matrix& p, int num_classes);

}  // namespace avatar
