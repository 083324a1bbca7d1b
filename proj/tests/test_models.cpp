#include <cmath>

#include <doctest.h>

#include "avatar/models.hpp"
#include "test_util.hpp"

using namespace avatar;

namespace {

FeatureExtractor linear_extractor(int in, int out) {
    FeatureExtractorSpec spec;
    spec.input_dim = in;
    spec.hidden = {};
    spec.embedding_dim = out;
    return FeatureExtractor(spec);
}

// Classifier whose logits equal its (K+1)-wide input.
JointDiscriminatorClassifier passthrough_classifier(int k) {
    ClassifierSpec spec;
    spec.num_classes = k;
    JointDiscriminatorClassifier g(k + 1, spec);
    g.net().layers()[0].weight = Matrix::Identity(k + 1, k + 1);
    return g;
}

}  // namespace

TEST_CASE("extract_features: identity and zero extractors") {
    auto f = linear_extractor(2, 2);
    f.net().layers()[0].weight = Matrix::Identity(2, 2);
    Matrix x(1, 2);
    x << 1, 2;
    const Matrix z = extract_features(f, x);
    CHECK(z(0, 0) == 1.0);
    CHECK(z(0, 1) == 2.0);

    auto zero = linear_extractor(3, 4);
    std::mt19937_64 rng(3);
    const Matrix zz = extract_features(zero, testutil::random_matrix(rng, 5, 3));
    CHECK(zz.isZero(0.0));
}

TEST_CASE("extract_features: seeded two-layer net matches scalar re-evaluation") {
    FeatureExtractorSpec spec;
    spec.input_dim = 3;
    spec.hidden = {5};
    spec.embedding_dim = 4;
    spec.activation = Activation::tanh;
    FeatureExtractor f(spec);
    std::mt19937_64 rng(1337);
    f.net().init_uniform(rng);
    Matrix x(2, 3);
    x << 0.3, -1.2, 0.7, 2.0, 0.1, -0.4;
    const Matrix z = extract_features(f, x);

    const auto& l0 = f.net().layers()[0];
    const auto& l1 = f.net().layers()[1];
    for (int r = 0; r < 2; ++r) {
        auto h = oracle::dense(testutil::to_mat(l0.weight), testutil::to_vec(l0.bias),
                               {x(r, 0), x(r, 1), x(r, 2)});
        for (double& v : h) v = std::tanh(v);
        const auto out = oracle::dense(testutil::to_mat(l1.weight), testutil::to_vec(l1.bias), h);
        for (int j = 0; j < 4; ++j) CHECK(z(r, j) == doctest::Approx(out[static_cast<std::size_t>(j)]).epsilon(1e-13));
    }
}

TEST_CASE("extract_features: width mismatch is a configuration error") {
    auto f = linear_extractor(2, 2);
    CHECK_THROWS_AS(extract_features(f, Matrix::Zero(1, 3)), ConfigError);
}

TEST_CASE("fan-in init is deterministic and bounded") {
    FeatureExtractorSpec fs;
    fs.input_dim = 4;
    const auto a = make_model_pair(fs, {}, 9);
    const auto b = make_model_pair(fs, {}, 9);
    CHECK(a.extractor.net().flat_parameters() == b.extractor.net().flat_parameters());
    CHECK(a.classifier.net().flat_parameters() == b.classifier.net().flat_parameters());
    const auto& w = a.extractor.net().layers()[0].weight;
    CHECK(w.cwiseAbs().maxCoeff() <= 0.5);  // 1 / sqrt(4)
}

TEST_CASE("classify: softmax examples") {
    const auto g = passthrough_classifier(2);
    Matrix z = Matrix::Zero(1, 3);
    Matrix p = classify(g, z);
    for (int k = 0; k < 3; ++k) CHECK(p(0, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    z << std::log(2.0), 0.0, 0.0;
    p = classify(g, z);
    CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p(0, 2) == doctest::Approx(0.25).epsilon(1e-14));

    Matrix shifted = z.array() + 17.5;
    const Matrix ps = classify(g, shifted);
    CHECK((ps - p).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("classify: non-finite logits name the offending row") {
    const auto g = passthrough_classifier(2);
    Matrix z = Matrix::Zero(3, 3);
    z(2, 1) = std::numeric_limits<double>::infinity();
    try {
        classify(g, z);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.row() == 2);
    }
}

TEST_CASE("normalize_class_probs examples") {
    Vector p(3);
    p << 0.25, 0.25, 0.5;
    Vector pn = normalize_class_probs(p);
    CHECK(pn[0] == doctest::Approx(0.5));
    CHECK(pn[1] == doctest::Approx(0.5));

    p << 0.1, 0.3, 0.6;
    pn = normalize_class_probs(p);
    CHECK(pn[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(pn[1] == doctest::Approx(0.75).epsilon(1e-14));

    p << 0.4, 0.6, 0.0;
    pn = normalize_class_probs(p);
    CHECK(pn[0] == 0.4);
    CHECK(pn[1] == 0.6);

    p << 0.0, 0.0, 1.0;
    CHECK_THROWS_AS(normalize_class_probs(p), DegenerateInputError);
}

TEST_CASE("property: rows are simplex points and p' ignores the domain logit") {
    std::mt19937_64 rng(42);
    FeatureExtractorSpec fs;
    fs.input_dim = 3;
    fs.hidden = {8};
    fs.embedding_dim = 5;
    ClassifierSpec gs;
    gs.num_classes = 4;
    for (int trial = 0; trial < 50; ++trial) {
        auto model = make_model_pair(fs, gs, static_cast<std::uint64_t>(trial));
        const Matrix x = testutil::random_matrix(rng, 6, 3, -3, 3);
        const Matrix z = extract_features(model.extractor, x);
        const Matrix p = classify(model.classifier, z);
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-6);
            CHECK(p.row(i).minCoeff() >= 0.0);
        }
        const Matrix pn = normalize_class_probs(p);
        // Shift only the domain unit's bias.
        model.classifier.net().layers().back().bias[4] += 3.7;
        const Matrix pn2 = normalize_class_probs(classify(model.classifier, z));
        CHECK((pn - pn2).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("predict_classes excludes the domain unit") {
    Matrix p(2, 3);
    p << 0.2, 0.1, 0.7, 0.1, 0.3, 0.6;
    const auto y = predict_classes(p, 2);
    CHECK(y[0] == 0);
    CHECK(y[1] == 1);
}
