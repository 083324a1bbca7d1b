#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "avatar/checkpoint.hpp"
#include "avatar/config.hpp"
#include "avatar/metrics.hpp"
#include "avatar/optimizer.hpp"
#include "avatar/trainer.hpp"
#include "test_util.hpp"

using namespace avatar;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
    RunConfig c;
    c.extractor.hidden = {16};
    c.extractor.embedding_dim = 8;
    c.batch_size = 32;
    c.epochs = 4;
    c.warmup_epochs = 1;
    c.pretrain_epochs = 3;
    c.learning_rate = 0.01;
    return c;
}

DomainPair blobs() {
    GaussianShiftSpec g;
    g.num_classes = 2;
    g.n_per_domain = 120;
    g.separation = 6.0;
    g.shift = {1.0, 0.5};
    return make_gaussian_shift(g, 3);
}

}  // namespace

TEST_CASE("lr schedule endpoints") {
    CHECK(lr_schedule(0.0, 0.01) == 0.01);
    CHECK(lr_schedule(1.0, 1.0) == doctest::Approx(std::pow(11.0, -0.75)).epsilon(1e-15));
    CHECK(lr_schedule(1.0, 1.0) == doctest::Approx(0.1659).epsilon(1e-3));
    CHECK(lr_schedule(0.1, 1.0) == doctest::Approx(0.5946).epsilon(1e-3));
    CHECK(lr_schedule(-2.0, 0.5) == 0.5);
    CHECK(lr_schedule(4.0, 1.0) == lr_schedule(1.0, 1.0));
}

TEST_CASE("pretraining separates linearly separable blobs") {
    RunConfig c = small_config();
    const DomainPair p = blobs();
    const ModelPair m = pretrain_source(c, p, initial_model(c, p), 50);
    CHECK(evaluate(m, p.source.inputs, p.source.labels).accuracy >= 0.99);
}

TEST_CASE("pretraining: zero epochs is the identity, runs are deterministic") {
    RunConfig c = small_config();
    const DomainPair p = blobs();
    const ModelPair init = initial_model(c, p);
    const ModelPair same = pretrain_source(c, p, init, 0);
    CHECK(same.extractor.net().flat_parameters() == init.extractor.net().flat_parameters());
    CHECK(same.classifier.net().flat_parameters() == init.classifier.net().flat_parameters());
    const ModelPair a = pretrain_source(c, p, init, 3);
    const ModelPair b = pretrain_source(c, p, init, 3);
    CHECK(a.extractor.net().flat_parameters() == b.extractor.net().flat_parameters());
    CHECK(a.classifier.net().flat_parameters() == b.classifier.net().flat_parameters());
    CHECK(a.extractor.net().flat_parameters() != init.extractor.net().flat_parameters());
}

TEST_CASE("training is deterministic for a fixed seed") {
    RunConfig c = small_config();
    const DomainPair p = blobs();
    const auto r1 = train(c, p);
    const auto r2 = train(c, p);
    CHECK(r1.model.extractor.net().flat_parameters() == r2.model.extractor.net().flat_parameters());
    CHECK(r1.log.to_csv() == r2.log.to_csv());
}

TEST_CASE("no sample is negative while epochs do not exceed warm-up") {
    RunConfig c = small_config();
    c.epochs = 3;
    c.warmup_epochs = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // warm-up must be shorter than training
    c.warmup_epochs = 2;
    c.epochs = 3;
    std::size_t negatives_in_warmup = 0;
    TrainHooks hooks;
    hooks.on_epoch_start = [&](const EpochContext& e) {
        if (e.warmup) {
            negatives_in_warmup += e.selection.negative_count;
            CHECK(e.selection.thresholds.isZero());
        }
    };
    hooks.on_batch = [&](const BatchContext& b) {
        if (b.warmup)
            for (bool pos : b.targets.target_positive) CHECK(pos);
    };
    const auto r = train(c, blobs(), {}, hooks);
    CHECK(negatives_in_warmup == 0);
    CHECK(r.log.records()[0].negative_count == 0);
    CHECK(r.log.records()[1].negative_count == 0);
}

TEST_CASE("source variant never activates adversarial or target terms") {
    RunConfig c = small_config();
    c.variant = Variant::source;
    TrainHooks hooks;
    hooks.on_batch = [&](const BatchContext& b) {
        CHECK(b.losses.adv_g == 0.0);
        CHECK(b.losses.adv_f == 0.0);
        CHECK(b.losses.dis_t == 0.0);
    };
    train(c, blobs(), {}, hooks);
}

TEST_CASE("hooks fire once per epoch before that epoch's batches") {
    RunConfig c = small_config();
    std::vector<std::pair<char, int>> events;
    TrainHooks hooks;
    hooks.on_epoch_start = [&](const EpochContext& e) { events.emplace_back('E', e.epoch); };
    hooks.on_batch = [&](const BatchContext& b) { events.emplace_back('B', b.epoch); };
    const auto r = train(c, blobs(), {}, hooks);
    // ceil(max(120, 120) / 32) = 4 batches per epoch.
    CHECK(events.size() == static_cast<std::size_t>(c.epochs * 5));
    int current = 0;
    for (const auto& [kind, epoch] : events) {
        if (kind == 'E') {
            CHECK(epoch == current + 1);
            current = epoch;
        } else {
            CHECK(epoch == current);
        }
    }
    CHECK(r.log.size() == 4);
    CHECK(r.log.records().back().batches == 4);
}

TEST_CASE("evaluation fixtures") {
    CHECK(evaluate_predictions({0, 1, 1, 0}, {0, 1, 1, 0}, 2).accuracy == 1.0);
    CHECK(evaluate_predictions({1, 1, 1, 1}, {0, 1, 0, 1}, 2).accuracy == 0.5);
    // Hand count: positions 0, 2, 3, 5, 6, 9 agree.
    const Labels pred{0, 1, 2, 1, 0, 2, 2, 1, 0, 1};
    const Labels truth{0, 0, 2, 1, 1, 2, 2, 0, 2, 1};
    const Evaluation e = evaluate_predictions(pred, truth, 3);
    CHECK(e.accuracy == doctest::Approx(0.6));
    CHECK(e.confusion[0][1] == 2);
    CHECK(e.per_class_accuracy[2] == doctest::Approx(0.75));
    CHECK(cluster_purity({0, 1, 1}, {0, 1, 0}) == doctest::Approx(2.0 / 3.0));
    const Evaluation missing = evaluate_predictions({0, 0}, {0, 0}, 2);
    CHECK(std::isnan(missing.per_class_accuracy[1]));
    CHECK(mean_class_accuracy(missing, {0, 1}) == 1.0);
}

TEST_CASE("run directory artifacts and checkpoint round-trip") {
    const fs::path dir = fs::temp_directory_path() / "avatar_test_run";
    fs::remove_all(dir);
    RunConfig c = small_config();
    c.epochs = 10;
    c.checkpoint_every = 5;
    c.export_embeddings = true;
    c.export_cluster_state = true;
    const DomainPair p = blobs();
    const auto r = train(c, p, dir);
    for (const char* f : {"config.txt", "batches.csv", "metrics.csv", "metrics.jsonl", "embeddings.csv",
                          "checkpoints/epoch_0005.json", "checkpoints/epoch_0010.json", "checkpoints/final.json",
                          "cluster_state/epoch_0001_centroids.csv", "cluster_state/epoch_0010_samples.csv"})
        CHECK_MESSAGE(fs::exists(dir / f), f);

    const ModelPair loaded = load_checkpoint(dir / "checkpoints" / "final.json");
    CHECK(loaded.extractor.net().flat_parameters() == r.model.extractor.net().flat_parameters());
    CHECK(loaded.classifier.net().flat_parameters() == r.model.classifier.net().flat_parameters());

    const MetricsLog back = MetricsLog::read_jsonl(dir / "metrics.jsonl");
    REQUIRE(back.size() == r.log.size());
    CHECK(back.records().back().target_accuracy == r.log.records().back().target_accuracy);
    CHECK(back.records().back().thresholds == r.log.records().back().thresholds);
    fs::remove_all(dir);
}

TEST_CASE("cluster refresh yields weights in [0, 1] and one assignment per target sample") {
    RunConfig c = small_config();
    const DomainPair p = blobs();
    const ClusterState s = refresh_cluster_state(pretrain_source(c, p), p, c.kmeans);
    CHECK(s.assignments.size() == static_cast<std::size_t>(p.target.inputs.rows()));
    CHECK(s.source_weights.minCoeff() >= 0.0);
    CHECK(s.target_weights.maxCoeff() <= 1.0);
    CHECK(s.centroids.rows() == 2);
}
