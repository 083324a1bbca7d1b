#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "avatar/data.hpp"
#include "test_util.hpp"

using namespace avatar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("avatar_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
}

// Distance from the noiseless moon curve of class c, in un-centered coordinates.
double moon_residual(double x, double y, int c) {
    x += 0.5;
    y += 0.25;
    if (c == 1) {
        x = 1.0 - x;
        y = 0.5 - y;
    }
    if (y < -1e-9) return 1.0;
    return std::abs(std::sqrt(x * x + y * y) - 1.0);
}

// Logistic regression by full-batch gradient descent; returns training accuracy.
double linear_probe_accuracy(const Matrix& a, const Matrix& b) {
    const Eigen::Index n = a.rows() + b.rows(), d = a.cols();
    std::vector<double> w(static_cast<std::size_t>(d), 0.0);
    double bias = 0.0;
    auto row = [&](Eigen::Index i) { return i < a.rows() ? a.row(i) : b.row(i - a.rows()); };
    for (int it = 0; it < 500; ++it) {
        std::vector<double> gw(static_cast<std::size_t>(d), 0.0);
        double gb = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = bias;
            for (Eigen::Index j = 0; j < d; ++j) s += w[static_cast<std::size_t>(j)] * row(i)[j];
            const double err = 1.0 / (1.0 + std::exp(-s)) - (i < a.rows() ? 1.0 : 0.0);
            for (Eigen::Index j = 0; j < d; ++j) gw[static_cast<std::size_t>(j)] += err * row(i)[j];
            gb += err;
        }
        for (Eigen::Index j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] -= 0.1 * gw[static_cast<std::size_t>(j)] / static_cast<double>(n);
        bias -= 0.1 * gb / static_cast<double>(n);
    }
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = bias;
        for (Eigen::Index j = 0; j < d; ++j) s += w[static_cast<std::size_t>(j)] * row(i)[j];
        correct += (s > 0) == (i < a.rows());
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("two-moons: class counts and determinism") {
    const auto p = make_two_moons_shift(200, 45, 0.1, 7);
    CHECK(class_counts(p.source.labels, 2) == std::vector<std::size_t>{100, 100});
    CHECK(class_counts(*p.target_eval_labels, 2) == std::vector<std::size_t>{100, 100});
    CHECK(p.target.inputs.rows() == 200);
    const auto q = make_two_moons_shift(200, 45, 0.1, 7);
    CHECK(p.source.inputs == q.source.inputs);
    CHECK(p.target.inputs == q.target.inputs);
    const auto r = make_two_moons_shift(200, 45, 0.1, 8);
    CHECK(p.source.inputs != r.source.inputs);
}

TEST_CASE("two-moons: rotation 0 keeps the distribution, rotation 180 reflects it") {
    const auto p0 = make_two_moons_shift(400, 0, 0.0, 3);
    for (Eigen::Index i = 0; i < 400; ++i) {
        const int c = (*p0.target_eval_labels)[static_cast<std::size_t>(i)];
        CHECK(moon_residual(p0.target.inputs(i, 0), p0.target.inputs(i, 1), c) < 1e-9);
        CHECK(moon_residual(p0.source.inputs(i, 0), p0.source.inputs(i, 1), p0.source.labels[static_cast<std::size_t>(i)]) < 1e-9);
    }
    const auto p180 = make_two_moons_shift(400, 180, 0.0, 3);
    for (Eigen::Index i = 0; i < 400; ++i) {
        const int c = (*p180.target_eval_labels)[static_cast<std::size_t>(i)];
        CHECK(moon_residual(-p180.target.inputs(i, 0), -p180.target.inputs(i, 1), c) < 1e-9);
    }
}

TEST_CASE("gaussian shift: counts, zero-shift agreement, separable shift") {
    GaussianShiftSpec spec;
    spec.num_classes = 3;
    spec.n_per_domain = 300;
    const auto p = make_gaussian_shift(spec, 7);
    CHECK(class_counts(p.source.labels, 3) == std::vector<std::size_t>{100, 100, 100});
    CHECK(class_counts(*p.target_eval_labels, 3) == std::vector<std::size_t>{100, 100, 100});
    for (int c = 0; c < 3; ++c) {
        RowVector ms = RowVector::Zero(3), mt = RowVector::Zero(3);
        for (Eigen::Index i = 0; i < 300; ++i) {
            if (p.source.labels[static_cast<std::size_t>(i)] == c) ms += p.source.inputs.row(i) / 100.0;
            if ((*p.target_eval_labels)[static_cast<std::size_t>(i)] == c) mt += p.target.inputs.row(i) / 100.0;
        }
        // Each mean coordinate has sd sigma/sqrt(n); the difference of two such has sd sqrt(2) times that.
        CHECK((ms - mt).cwiseAbs().maxCoeff() < 3.0 * std::sqrt(2.0) / std::sqrt(100.0));
    }

    GaussianShiftSpec far;
    far.num_classes = 2;
    far.n_per_domain = 200;
    far.shift = {10.0, 0.0};
    const auto pf = make_gaussian_shift(far, 11);
    CHECK(linear_probe_accuracy(pf.source.inputs, pf.target.inputs) >= 0.98);
}

TEST_CASE("imbalance protocol") {
    CHECK(minority_size(100, 0.05) == 5);
    CHECK(minority_size(90, 0.05) == 5);
    CHECK(minority_size(10, 0.01) == 1);
    const auto fr = imbalance_fractions();
    REQUIRE(fr.size() == 10);
    CHECK(fr.front() == doctest::Approx(0.10));
    CHECK(fr.back() == doctest::Approx(0.01));

    GaussianShiftSpec spec;
    spec.num_classes = 10;
    spec.n_per_domain = 1000;
    const auto p = make_gaussian_shift(spec, 5);
    ImbalanceSpec im;
    im.minority_fraction = 0.05;
    im.source_downsample = 0.9;
    const auto q = make_imbalanced(p, im, 5);
    const auto tc = class_counts(*q.target_eval_labels, 10);
    CHECK(tc[0] == 100);
    for (int c = 1; c < 10; ++c) CHECK(tc[static_cast<std::size_t>(c)] == 5);
    CHECK(q.source.inputs.rows() == 100);
    CHECK(q.target.inputs.rows() == static_cast<Eigen::Index>(q.target_eval_labels->size()));
    // Deterministic in the seed.
    const auto q2 = make_imbalanced(p, im, 5);
    CHECK(q2.target.inputs == q.target.inputs);

    im.majority_class = 12;
    CHECK_THROWS_AS(make_imbalanced(p, im, 5), ArgumentError);
}

TEST_CASE("directory dataset: loading, vocabulary and errors") {
    TempDir dir("manifest");
    write_file(dir.path / "a.txt", "1 2\n");
    write_file(dir.path / "b.txt", "3,4");
    write_file(dir.path / "c.txt", "5 6");
    write_file(dir.path / "d.txt", "7 8");
    write_file(dir.path / "manifest.csv", "path,domain,label\na.txt,source,cat\nb.txt,source,dog\nc.txt,target,dog\nd.txt,target,cat\n");
    const auto p = load_directory_dataset(dir.path);
    CHECK(p.source.inputs.rows() == 2);
    CHECK(p.target.inputs.rows() == 2);
    CHECK(p.num_classes == 2);
    CHECK(p.class_names == std::vector<std::string>{"cat", "dog"});
    REQUIRE(p.target_eval_labels);
    CHECK(*p.target_eval_labels == Labels{1, 0});
    CHECK(p.source.inputs(1, 1) == 4.0);

    write_file(dir.path / "bad.csv", "path,domain,label\na.txt,source,cat\nc.txt,target,bird\n");
    try {
        load_directory_dataset(dir.path, "bad.csv");
        FAIL("expected an error");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("bird") != std::string::npos);
    }
    write_file(dir.path / "missing.csv", "path,domain,label\nnope.txt,source,cat\nc.txt,target,\n");
    CHECK_THROWS_AS(load_directory_dataset(dir.path, "missing.csv"), ArgumentError);
    write_file(dir.path / "e.txt", "1 2 3");
    write_file(dir.path / "width.csv", "path,domain,label\na.txt,source,cat\ne.txt,target,\n");
    CHECK_THROWS_AS(load_directory_dataset(dir.path, "width.csv"), ArgumentError);

    write_file(dir.path / "unlabeled.csv", "path,domain,label\na.txt,source,cat\nb.txt,source,dog\nc.txt,target,\n");
    CHECK_FALSE(load_directory_dataset(dir.path, "unlabeled.csv").target_eval_labels.has_value());
}

TEST_CASE("directory dataset: export and reload round-trip") {
    TempDir dir("roundtrip");
    const auto p = make_two_moons_shift(20, 30, 0.1, 2);
    export_directory_dataset(p, dir.path);
    const auto q = load_directory_dataset(dir.path);
    CHECK(q.source.labels == p.source.labels);
    CHECK(*q.target_eval_labels == *p.target_eval_labels);
    CHECK((q.source.inputs - p.source.inputs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((q.target.inputs - p.target.inputs).cwiseAbs().maxCoeff() < 1e-12);
}
