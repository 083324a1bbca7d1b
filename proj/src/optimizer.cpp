#include "avatar/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace avatar {

void SgdMomentum::step(std::vector<DenseLayer>& params, const LayerGrads& grads, double lr) {
    if (grads.size() != params.size()) throw ArgumentError("gradient/parameter layer count mismatch");
    if (velocity_.size() != params.size()) velocity_ = zero_grads_like(params);
    for (std::size_t l = 0; l < params.size(); ++l) {
        auto& v = velocity_[l];
        v.weight = momentum_ * v.weight + grads[l].weight;
        v.bias = momentum_ * v.bias + grads[l].bias;
        if (weight_decay_ != 0.0) {
            v.weight += weight_decay_ * params[l].weight;
            v.bias += weight_decay_ * params[l].bias;
        }
        params[l].weight -= lr * v.weight;
        params[l].bias -= lr * v.bias;
    }
}

double lr_schedule(double progress, double base_lr) {
    const double p = std::clamp(progress, 0.0, 1.0);
    return base_lr * std::pow(1.0 + 10.0 * p, -0.75);
}

}  // namespace avatar
