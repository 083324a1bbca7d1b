#pragma once

#include <string>
#include <string_view>

#include "avatar/losses.hpp"
#include "avatar/models.hpp"

namespace avatar {

enum class Variant { source, variant1, variant2, avatar };

Variant parse_variant(std::string_view name);
std::string to_string(Variant v);

/// Which loss components a variant switches on.
struct ObjectiveTerms {
    bool adversarial = true;      // adv_g / adv_f
    bool target = true;           // dis_t
    bool selection = true;        // negative branch of dis_t
    bool weighted_source = true;  // dis_s uses cluster weights (else w = 1)

    static ObjectiveTerms for_variant(Variant v);
};

/// Everything a batch loss needs besides the network outputs. Weights, mask and q are held
/// constant while differentiating.
struct BatchTargets {
    Labels source_labels;
    Vector source_weights;
    Vector target_weights;
    Mask target_positive;
    Matrix q;  // N_t x K; unused when the target term is off
};

struct ForwardPass {
    MlpCache f_source, f_target, g_source, g_target;
    Matrix z_source, z_target;
    Matrix p_source, p_target;      // K+1 softmax rows
    Matrix pn_source, pn_target;    // normalized class probabilities
};

ForwardPass forward_pass(const ModelPair& model, const Matrix& x_source, const Matrix& x_target);

LossBreakdown evaluate_objectives(const ForwardPass& fp, const BatchTargets& targets,
                                  const ObjectiveTerms& terms, double lambda);

/// Gradient of total_g with respect to the classifier parameters (extractor outputs fixed).
LayerGrads classifier_gradient(const ModelPair& model, const ForwardPass& fp, const BatchTargets& targets,
                               const ObjectiveTerms& terms, double lambda);

/// Gradient of total_f with respect to the extractor parameters (classifier fixed).
LayerGrads extractor_gradient(const ModelPair& model, const ForwardPass& fp, const BatchTargets& targets,
                              const ObjectiveTerms& terms, double lambda);

}  // namespace avatar
