#pragma once

#include "avatar/models.hpp"

namespace avatar {

/// Heavy-ball SGD: v <- mu v + (g + wd * theta); theta <- theta - lr v.
class SgdMomentum {
public:
    SgdMomentum(double momentum = 0.9, double weight_decay = 0.0)
        : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(std::vector<DenseLayer>& params, const LayerGrads& grads, double lr);

private:
    double momentum_;
    double weight_decay_;
    LayerGrads velocity_;
};

/// eta0 * (1 + 10 p)^(-0.75), with p clamped to [0, 1].
double lr_schedule(double progress, double base_lr);

}  // namespace avatar
