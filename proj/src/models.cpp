#include "avatar/models.hpp"

#include <cmath>
#include <limits>

namespace avatar {

namespace {

double activate(Activation a, double x) {
    switch (a) {
    case Activation::identity: return x;
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    }
    return x;
}

double activate_grad(Activation a, double x) {
    switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::softplus: return 1.0 / (1.0 + std::exp(-x));
    }
    return 1.0;
}

}  // namespace

Activation parse_activation(std::string_view name) {
    if (name == "identity" || name == "linear") return Activation::identity;
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    if (name == "softplus") return Activation::softplus;
    throw ConfigError("unknown activation '" + std::string(name) +
                      "' (expected identity, tanh, relu, softplus)");
}

std::string to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::softplus: return "softplus";
    }
    return "identity";
}

Mlp::Mlp(std::vector<int> widths, Activation activation)
    : widths_(std::move(widths)), activation_(activation) {
    if (widths_.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
    for (int w : widths_)
        if (w <= 0) throw ConfigError("layer widths must be positive");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        DenseLayer layer;
        layer.weight = Matrix::Zero(widths_[l + 1], widths_[l]);
        layer.bias = Vector::Zero(widths_[l + 1]);
        layers_.push_back(std::move(layer));
    }
}

void Mlp::init_uniform(std::mt19937_64& rng) {
    for (auto& layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = dist(rng);
    }
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
    if (x.cols() != input_dim())
        throw ConfigError("input width " + std::to_string(x.cols()) + " does not match layer width " +
                          std::to_string(input_dim()));
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    Matrix a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Matrix h = a * layers_[l].weight.transpose();
        h.rowwise() += layers_[l].bias.transpose();
        const bool last = l + 1 == layers_.size();
        if (cache) {
            cache->inputs.push_back(a);
            cache->pre.push_back(h);
        }
        if (!last && activation_ != Activation::identity)
            a = h.unaryExpr([this](double v) { return activate(activation_, v); });
        else
            a = std::move(h);
    }
    return a;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& grad_out, LayerGrads* grads) const {
    if (grads && grads->size() != layers_.size()) *grads = zero_grads_like(layers_);
    Matrix d = grad_out;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const bool last = li + 1 == layers_.size();
        if (!last && activation_ != Activation::identity)
            d.array() *= cache.pre[li].unaryExpr([this](double v) { return activate_grad(activation_, v); }).array();
        if (grads) {
            (*grads)[li].weight = d.transpose() * cache.inputs[li];
            (*grads)[li].bias = d.colwise().sum().transpose();
        }
        d = d * layers_[li].weight;
    }
    return d;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

Vector Mlp::flat_parameters() const { return flatten(layers_); }

void Mlp::set_flat_parameters(const Vector& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
        throw ArgumentError("flat parameter vector has the wrong length");
    Eigen::Index o = 0;
    for (auto& l : layers_) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = flat[o++];
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = flat[o++];
    }
}

LayerGrads zero_grads_like(const std::vector<DenseLayer>& layers) {
    LayerGrads g;
    g.reserve(layers.size());
    for (const auto& l : layers)
        g.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    return g;
}

Vector flatten(const LayerGrads& grads) {
    Eigen::Index n = 0;
    for (const auto& l : grads) n += l.weight.size() + l.bias.size();
    Vector flat(n);
    Eigen::Index o = 0;
    for (const auto& l : grads) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) flat[o++] = l.weight.data()[i];
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat[o++] = l.bias[i];
    }
    return flat;
}

FeatureExtractor::FeatureExtractor(const FeatureExtractorSpec& spec) : spec_(spec) {
    std::vector<int> widths{spec.input_dim};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.embedding_dim);
    net_ = Mlp(std::move(widths), spec.activation);
}

JointDiscriminatorClassifier::JointDiscriminatorClassifier(int embedding_dim, const ClassifierSpec& spec)
    : spec_(spec) {
    if (spec.num_classes < 1) throw ConfigError("class count must be positive");
    std::vector<int> widths{embedding_dim};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.num_classes + 1);
    net_ = Mlp(std::move(widths), spec.activation);
}

ModelPair make_model_pair(const FeatureExtractorSpec& f_spec, const ClassifierSpec& g_spec,
                          std::uint64_t seed) {
    ModelPair pair{FeatureExtractor(f_spec), JointDiscriminatorClassifier(f_spec.embedding_dim, g_spec)};
    std::mt19937_64 rng(seed);
    pair.extractor.net().init_uniform(rng);
    pair.classifier.net().init_uniform(rng);
    return pair;
}

Matrix extract_features(const FeatureExtractor& model, const Matrix& batch, MlpCache* cache) {
    return model.net().forward(batch, cache);
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        if (!logits.row(i).allFinite()) throw NumericError("non-finite logits", i);
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Matrix classify(const JointDiscriminatorClassifier& model, const Matrix& z, MlpCache* cache) {
    return softmax_rows(model.net().forward(z, cache));
}

Vector normalize_class_probs(const Vector& p) {
    const Eigen::Index k = p.size() - 1;
    if (k < 1) throw ArgumentError("probability row needs at least one class unit");
    const double s = p.head(k).sum();
    if (!(s > 0.0)) throw DegenerateInputError("all class probabilities are zero");
    return p.head(k) / s;
}

Matrix normalize_class_probs(const Matrix& p) {
    const Eigen::Index k = p.cols() - 1;
    if (k < 1) throw ArgumentError("probability rows need at least one class unit");
    Matrix out(p.rows(), k);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double s = p.row(i).head(k).sum();
        if (!(s > 0.0)) throw DegenerateInputError("all class probabilities are zero in row " + std::to_string(i));
        out.row(i) = p.row(i).head(k) / s;
    }
    return out;
}

Labels predict_classes(const Matrix& p, int num_classes) {
    Labels out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        Eigen::Index best = 0;
        p.row(i).head(num_classes).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace avatar
