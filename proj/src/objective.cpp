#include "avatar/objective.hpp"

namespace avatar {

Variant parse_variant(std::string_view name) {
    if (name == "source") return Variant::source;
    if (name == "variant1") return Variant::variant1;
    if (name == "variant2") return Variant::variant2;
    if (name == "avatar") return Variant::avatar;
    throw ConfigError("invalid variant '" + std::string(name) +
                      "' (valid variants: source, variant1, variant2, avatar)");
}

std::string to_string(Variant v) {
    switch (v) {
    case Variant::source: return "source";
    case Variant::variant1: return "variant1";
    case Variant::variant2: return "variant2";
    case Variant::avatar: return "avatar";
    }
    return "avatar";
}

ObjectiveTerms ObjectiveTerms::for_variant(Variant v) {
    switch (v) {
    case Variant::source: return {false, false, false, false};
    case Variant::variant1: return {true, false, false, true};
    case Variant::variant2: return {true, true, false, true};
    case Variant::avatar: return {true, true, true, true};
    }
    return {};
}

ForwardPass forward_pass(const ModelPair& model, const Matrix& x_source, const Matrix& x_target) {
    ForwardPass fp;
    fp.z_source = extract_features(model.extractor, x_source, &fp.f_source);
    fp.z_target = extract_features(model.extractor, x_target, &fp.f_target);
    fp.p_source = classify(model.classifier, fp.z_source, &fp.g_source);
    fp.p_target = classify(model.classifier, fp.z_target, &fp.g_target);
    fp.pn_source = normalize_class_probs(fp.p_source);
    fp.pn_target = normalize_class_probs(fp.p_target);
    return fp;
}

namespace {

enum class Side { extractor, classifier };

Vector effective_source_weights(const BatchTargets& t, const ObjectiveTerms& terms, Eigen::Index n) {
    return terms.weighted_source ? t.source_weights : Vector::Ones(n);
}

// Logit gradients are taken from log-softmax identities rather than by chaining dL/dp through
// the softmax: the result is the derivative of the unclamped log terms, bounded by the weights,
// and it does not vanish when a probability saturates.

// -c * sum_k t_k log softmax(z)_k over the first `k` logits (t sums to one): c * (p' - t).
void add_cross_entropy(Eigen::Ref<RowVector> dz, const RowVector& pn, const RowVector& t, double c) {
    dz.head(pn.size()) += c * (pn - t);
}

// -c * sum_k t_k log(1 - p'_k) over the first `k` logits.
//   d/dz_m = c * (t_m p'_m - p'_m * sum_{k != m} t_k p'_k / (1 - p'_k)),
// with 1 - p'_k summed from the other entries so it stays exact near p'_k = 1.
void add_complement_cross_entropy(Eigen::Ref<RowVector> dz, const RowVector& pn, const RowVector& t, double c) {
    const Eigen::Index k = pn.size();
    RowVector r = RowVector::Zero(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (t[j] == 0.0) continue;
        double others = 0.0;
        for (Eigen::Index m = 0; m < k; ++m)
            if (m != j) others += pn[m];
        if (others > 0.0) r[j] = t[j] * pn[j] / others;
    }
    const double total = r.sum();
    for (Eigen::Index m = 0; m < k; ++m) dz[m] += c * (t[m] * pn[m] - pn[m] * (total - r[m]));
}

// -c log p_K (domain unit of the full softmax): c * (p - e_K).
void add_domain_log(Eigen::Ref<RowVector> dz, const RowVector& p, double c) {
    dz += c * p;
    dz[p.size() - 1] -= c;
}

// -c log(1 - p_K): c * p_K on the domain logit, -c * p_K p_m / (1 - p_K) on class logit m.
void add_domain_log1m(Eigen::Ref<RowVector> dz, const RowVector& p, double c) {
    const Eigen::Index k = p.size() - 1;
    const double rest = p.head(k).sum();
    dz[k] += c * p[k];
    if (rest > 0.0) dz.head(k) -= c * p[k] / rest * p.head(k);
}

struct LogitGrads {
    Matrix source;
    Matrix target;
};

LogitGrads logit_gradients(const ForwardPass& fp, const BatchTargets& t, const ObjectiveTerms& terms, double lambda,
                           Side side) {
    const Eigen::Index k = fp.pn_source.cols();
    const Eigen::Index ns = fp.p_source.rows();
    const Eigen::Index nt = fp.p_target.rows();
    const Vector ws = effective_source_weights(t, terms, ns);
    LogitGrads out{Matrix::Zero(ns, k + 1), Matrix::Zero(nt, k + 1)};

    const double inv_s = ns > 0 ? 1.0 / static_cast<double>(ns) : 0.0;
    const double inv_t = nt > 0 ? 1.0 / static_cast<double>(nt) : 0.0;
    for (Eigen::Index i = 0; i < ns; ++i) {
        RowVector onehot = RowVector::Zero(k);
        onehot[t.source_labels[static_cast<std::size_t>(i)]] = 1.0;
        auto dz = out.source.row(i);
        add_cross_entropy(dz, fp.pn_source.row(i), onehot, inv_s * ws[i]);
        if (terms.adversarial) {
            if (side == Side::classifier)
                add_domain_log(dz, fp.p_source.row(i), inv_s * ws[i]);
            else
                add_domain_log1m(dz, fp.p_source.row(i), inv_s * ws[i]);
        }
    }
    for (Eigen::Index i = 0; i < nt; ++i) {
        auto dz = out.target.row(i);
        const double w = t.target_weights[i];
        if (terms.target) {
            if (t.target_positive[static_cast<std::size_t>(i)])
                add_cross_entropy(dz, fp.pn_target.row(i), t.q.row(i), inv_t * w);
            else
                add_complement_cross_entropy(dz, fp.pn_target.row(i), t.q.row(i), inv_t * (1.0 - w));
        }
        if (terms.adversarial) {
            if (side == Side::classifier)
                add_domain_log1m(dz, fp.p_target.row(i), inv_t * w);
            else
                add_domain_log(dz, fp.p_target.row(i), inv_t * w);
        }
    }
    out.source *= lambda;
    out.target *= lambda;
    return out;
}

void accumulate(LayerGrads& into, const LayerGrads& g) {
    for (std::size_t l = 0; l < into.size(); ++l) {
        into[l].weight += g[l].weight;
        into[l].bias += g[l].bias;
    }
}

}  // namespace

LossBreakdown evaluate_objectives(const ForwardPass& fp, const BatchTargets& t, const ObjectiveTerms& terms,
                                  double lambda) {
    const Eigen::Index k = fp.pn_source.cols();
    const Vector ws = effective_source_weights(t, terms, fp.p_source.rows());
    const double dis_s = discriminative_source_loss(fp.pn_source, t.source_labels, ws);
    double dis_t = 0.0;
    if (terms.target && fp.p_target.rows() > 0)
        dis_t = discriminative_target_loss(fp.pn_target, t.q, t.target_weights, t.target_positive);
    double adv_g = 0.0, adv_f = 0.0;
    if (terms.adversarial) {
        const Vector dom_s = fp.p_source.col(k);
        const Vector dom_t = fp.p_target.col(k);
        adv_g = adversarial_loss_g(dom_s, ws, dom_t, t.target_weights);
        adv_f = adversarial_loss_f(dom_s, ws, dom_t, t.target_weights);
    }
    return total_objectives(adv_g, adv_f, dis_t, dis_s, lambda);
}

LayerGrads classifier_gradient(const ModelPair& model, const ForwardPass& fp, const BatchTargets& t,
                               const ObjectiveTerms& terms, double lambda) {
    const LogitGrads lg = logit_gradients(fp, t, terms, lambda, Side::classifier);
    const auto& net = model.classifier.net();
    LayerGrads total = zero_grads_like(net.layers());
    LayerGrads part;
    net.backward(fp.g_source, lg.source, &part);
    accumulate(total, part);
    if (fp.p_target.rows() > 0) {
        net.backward(fp.g_target, lg.target, &part);
        accumulate(total, part);
    }
    return total;
}

LayerGrads extractor_gradient(const ModelPair& model, const ForwardPass& fp, const BatchTargets& t,
                              const ObjectiveTerms& terms, double lambda) {
    const LogitGrads lg = logit_gradients(fp, t, terms, lambda, Side::extractor);
    const auto& g_net = model.classifier.net();
    const auto& f_net = model.extractor.net();
    LayerGrads total = zero_grads_like(f_net.layers());
    LayerGrads part;
    const Matrix dz_s = g_net.backward(fp.g_source, lg.source, nullptr);
    f_net.backward(fp.f_source, dz_s, &part);
    accumulate(total, part);
    if (fp.p_target.rows() > 0) {
        const Matrix dz_t = g_net.backward(fp.g_target, lg.target, nullptr);
        f_net.backward(fp.f_target, dz_t, &part);
        accumulate(total, part);
    }
    return total;
}

}  // namespace avatar
