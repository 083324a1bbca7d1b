#include <cmath>

#include <doctest.h>

#include "avatar/losses.hpp"
#include "avatar/objective.hpp"
#include "avatar/optimizer.hpp"
#include "test_util.hpp"

using namespace avatar;

namespace {

struct Fixture {
    ModelPair model;
    Matrix xs, xt;
    BatchTargets targets;
};

Fixture make_fixture(std::uint64_t seed) {
    FeatureExtractorSpec fs;
    fs.input_dim = 3;
    fs.hidden = {6};
    fs.embedding_dim = 4;
    ClassifierSpec gs;
    gs.num_classes = 3;
    gs.hidden = {5};
    Fixture f{make_model_pair(fs, gs, seed), {}, {}, {}};
    std::mt19937_64 rng(seed + 1);
    f.xs = testutil::random_matrix(rng, 8, 3, -2, 2);
    f.xt = testutil::random_matrix(rng, 8, 3, -2, 2);
    f.targets.source_labels = testutil::random_labels(rng, 8, 3);
    f.targets.source_weights = testutil::random_vector(rng, 8);
    f.targets.target_weights = testutil::random_vector(rng, 8);
    f.targets.target_positive = {true, false, true, true, false, true, false, true};
    f.targets.q = testutil::random_simplex(rng, 8, 3);
    return f;
}

double relative_error(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

template <class Loss>
Vector finite_difference(Mlp& net, Loss loss) {
    Vector theta = net.flat_parameters();
    Vector out(theta.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        net.set_flat_parameters(theta);
        const double up = loss();
        theta[i] = keep - h;
        net.set_flat_parameters(theta);
        const double down = loss();
        theta[i] = keep;
        out[i] = (up - down) / (2 * h);
    }
    net.set_flat_parameters(theta);
    return out;
}

}  // namespace

TEST_CASE("gradient of total_f w.r.t. extractor parameters matches finite differences") {
    for (auto v : {Variant::source, Variant::variant1, Variant::variant2, Variant::avatar}) {
        auto fx = make_fixture(100 + static_cast<std::uint64_t>(v));
        const auto terms = ObjectiveTerms::for_variant(v);
        const double lambda = 0.7;
        REQUIRE(fx.model.extractor.net().parameter_count() <= 10000);
        const ForwardPass fp = forward_pass(fx.model, fx.xs, fx.xt);
        const Vector analytic = flatten(extractor_gradient(fx.model, fp, fx.targets, terms, lambda));
        const Vector numeric = finite_difference(fx.model.extractor.net(), [&] {
            return evaluate_objectives(forward_pass(fx.model, fx.xs, fx.xt), fx.targets, terms, lambda).total_f;
        });
        CHECK(relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("gradient of total_g w.r.t. classifier parameters matches finite differences") {
    for (auto v : {Variant::source, Variant::variant1, Variant::variant2, Variant::avatar}) {
        auto fx = make_fixture(200 + static_cast<std::uint64_t>(v));
        const auto terms = ObjectiveTerms::for_variant(v);
        const double lambda = 0.9;
        const ForwardPass fp = forward_pass(fx.model, fx.xs, fx.xt);
        const Vector analytic = flatten(classifier_gradient(fx.model, fp, fx.targets, terms, lambda));
        const Vector numeric = finite_difference(fx.model.classifier.net(), [&] {
            return evaluate_objectives(forward_pass(fx.model, fx.xs, fx.xt), fx.targets, terms, lambda).total_g;
        });
        CHECK(relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("variant gating switches loss components") {
    auto fx = make_fixture(7);
    const ForwardPass fp = forward_pass(fx.model, fx.xs, fx.xt);
    const auto src = evaluate_objectives(fp, fx.targets, ObjectiveTerms::for_variant(Variant::source), 1.0);
    CHECK(src.adv_g == 0.0);
    CHECK(src.adv_f == 0.0);
    CHECK(src.dis_t == 0.0);
    // Unweighted source term.
    CHECK(src.dis_s == doctest::Approx(discriminative_source_loss(fp.pn_source, fx.targets.source_labels, Vector::Ones(8))));

    const auto v1 = evaluate_objectives(fp, fx.targets, ObjectiveTerms::for_variant(Variant::variant1), 1.0);
    CHECK(v1.adv_g > 0.0);
    CHECK(v1.dis_t == 0.0);

    const auto av = evaluate_objectives(fp, fx.targets, ObjectiveTerms::for_variant(Variant::avatar), 1.0);
    CHECK(av.dis_t > 0.0);
    CHECK(av.total_f == doctest::Approx(av.dis_t + av.dis_s + av.adv_f));
    CHECK(av.total_g == doctest::Approx(av.dis_t + av.dis_s + av.adv_g));

    CHECK(to_string(parse_variant("variant2")) == "variant2");
    try {
        parse_variant("avatr");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        for (const char* name : {"source", "variant1", "variant2", "avatar"}) CHECK(msg.find(name) != std::string::npos);
    }
}

TEST_CASE("empty target batch contributes nothing") {
    auto fx = make_fixture(9);
    BatchTargets t = fx.targets;
    t.target_weights.resize(0);
    t.target_positive.clear();
    t.q.resize(0, 3);
    const auto terms = ObjectiveTerms::for_variant(Variant::source);
    const ForwardPass fp = forward_pass(fx.model, fx.xs, Matrix(0, 3));
    const auto g = classifier_gradient(fx.model, fp, t, terms, 1.0);
    CHECK(flatten(g).allFinite());
}

TEST_CASE("sgd with momentum follows the heavy-ball recursion") {
    std::vector<DenseLayer> params{{Matrix::Constant(1, 1, 1.0), Vector::Zero(1)}};
    LayerGrads grads{{Matrix::Constant(1, 1, 2.0), Vector::Zero(1)}};
    SgdMomentum opt(0.9, 0.0);
    opt.step(params, grads, 0.1);
    CHECK(params[0].weight(0, 0) == doctest::Approx(1.0 - 0.1 * 2.0));
    opt.step(params, grads, 0.1);
    CHECK(params[0].weight(0, 0) == doctest::Approx(0.8 - 0.1 * (0.9 * 2.0 + 2.0)));
}
