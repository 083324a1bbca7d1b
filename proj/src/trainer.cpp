#include "avatar/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "avatar/checkpoint.hpp"
#include "avatar/optimizer.hpp"

namespace avatar {

namespace {

// Endless reshuffled pass over [0, n).
class IndexStream {
public:
    IndexStream(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        reshuffle();
    }

    std::vector<std::size_t> next(std::size_t count) {
        std::vector<std::size_t> out;
        out.reserve(count);
        while (out.size() < count) {
            if (pos_ == order_.size()) reshuffle();
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    void reshuffle() {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }

    std::vector<std::size_t> order_;
    std::mt19937_64& rng_;
    std::size_t pos_ = 0;
};

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

bool finite(const LossBreakdown& b) {
    return std::isfinite(b.adv_g) && std::isfinite(b.adv_f) && std::isfinite(b.dis_t) && std::isfinite(b.dis_s) &&
           std::isfinite(b.total_f) && std::isfinite(b.total_g);
}

[[noreturn]] void abort_non_finite(int epoch, std::size_t batch, const LossBreakdown& b) {
    std::ostringstream os;
    os << "non-finite loss at epoch " << epoch << ", batch " << batch << " (adv_g=" << b.adv_g
       << " adv_f=" << b.adv_f << " dis_t=" << b.dis_t << " dis_s=" << b.dis_s << ")";
    throw NumericError(os.str());
}

void add_into(LossBreakdown& acc, const LossBreakdown& b) {
    acc.adv_g += b.adv_g;
    acc.adv_f += b.adv_f;
    acc.dis_t += b.dis_t;
    acc.dis_s += b.dis_s;
    acc.dis += b.dis;
    acc.total_f += b.total_f;
    acc.total_g += b.total_g;
}

void scale(LossBreakdown& acc, double s) {
    acc.adv_g *= s;
    acc.adv_f *= s;
    acc.dis_t *= s;
    acc.dis_s *= s;
    acc.dis *= s;
    acc.total_f *= s;
    acc.total_g *= s;
}

std::string epoch_tag(int epoch) {
    std::ostringstream os;
    os << "epoch_" << std::setw(4) << std::setfill('0') << epoch;
    return os.str();
}

}  // namespace

ModelPair initial_model(const RunConfig& config, const DomainPair& pair) {
    FeatureExtractorSpec f = config.extractor;
    f.input_dim = pair.input_dim();
    ClassifierSpec g = config.classifier;
    g.num_classes = pair.num_classes;
    return make_model_pair(f, g, config.seed);
}

ModelPair pretrain_source(const RunConfig& config, const DomainPair& pair, ModelPair model, int epochs) {
    if (epochs <= 0) return model;
    const auto ns = static_cast<std::size_t>(pair.source.inputs.rows());
    if (ns == 0) throw ArgumentError("pretraining needs labeled source samples");
    const ObjectiveTerms terms = ObjectiveTerms::for_variant(Variant::source);
    auto rng = stream_rng(config.seed, 100);
    IndexStream stream(ns, rng);
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), ns);
    const std::size_t batches = (ns + batch - 1) / batch;
    SgdMomentum opt_f(config.momentum, config.weight_decay);
    SgdMomentum opt_g(config.momentum, config.weight_decay);
    const Matrix no_target(0, pair.source.inputs.cols());

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const double lr = lr_schedule(static_cast<double>(epoch - 1) / epochs, config.learning_rate);
        for (std::size_t b = 0; b < batches; ++b) {
            const auto idx = stream.next(batch);
            BatchTargets t;
            t.source_labels = gather(pair.source.labels, idx);
            t.source_weights = Vector::Ones(static_cast<Eigen::Index>(idx.size()));
            t.target_weights = Vector::Zero(0);
            const ForwardPass fp = forward_pass(model, gather_rows(pair.source.inputs, idx), no_target);
            const LossBreakdown losses = evaluate_objectives(fp, t, terms, 1.0);
            if (!finite(losses)) abort_non_finite(epoch, b, losses);
            const LayerGrads gg = classifier_gradient(model, fp, t, terms, 1.0);
            const LayerGrads gf = extractor_gradient(model, fp, t, terms, 1.0);
            opt_g.step(model.classifier.net().layers(), gg, lr * config.task_lr_multiplier);
            opt_f.step(model.extractor.net().layers(), gf, lr);
        }
    }
    return model;
}

ModelPair pretrain_source(const RunConfig& config, const DomainPair& pair) {
    return pretrain_source(config, pair, initial_model(config, pair), config.pretrain_epochs);
}

ClusterState refresh_cluster_state(const ModelPair& model, const DomainPair& pair, const KMeansOptions& options,
                                   const Matrix* previous_centroids) {
    const Matrix z_t = extract_features(model.extractor, pair.target.inputs);
    const Matrix z_s = extract_features(model.extractor, pair.source.inputs);
    const Matrix p_t = classify(model.classifier, z_t);

    Matrix init;
    try {
        init = init_centroids_from_classifier(z_t, p_t);
    } catch (const DegenerateInputError& e) {
        if (!previous_centroids) throw;
        spdlog::warn("{}; reusing previous centroids", e.what());
        init = *previous_centroids;
    }
    const Matrix& fallback = previous_centroids ? *previous_centroids : init;
    KMeansResult km = kernel_kmeans(z_t, pair.num_classes, init, options, &fallback);
    if (!km.empty_clusters.empty())
        spdlog::debug("{} empty target cluster(s) kept their previous centroid", km.empty_clusters.size());

    ClusterState state;
    state.source_weights = compute_source_weights(z_s, pair.source.labels, km.centroids);
    state.target_weights = compute_target_weights(z_t, km.assignments, km.centroids);
    state.centroids = std::move(km.centroids);
    state.assignments = std::move(km.assignments);
    state.empty_clusters = std::move(km.empty_clusters);
    state.kmeans_iterations = km.iterations;
    state.kmeans_converged = km.converged;
    return state;
}

std::vector<int> minority_classes(const RunConfig& config, int num_classes) {
    std::vector<int> out;
    if (!config.dataset.imbalance) return out;
    for (int c = 0; c < num_classes; ++c)
        if (c != config.dataset.imbalance->majority_class) out.push_back(c);
    return out;
}

void write_embeddings_csv(const std::filesystem::path& file, const ModelPair& model, const DomainPair& pair,
                          const ClusterState& cluster) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    out.precision(17);
    const Matrix z_s = extract_features(model.extractor, pair.source.inputs);
    const Matrix z_t = extract_features(model.extractor, pair.target.inputs);
    out << "sample_id,domain,label,weight";
    for (Eigen::Index j = 0; j < z_s.cols(); ++j) out << ",z" << j;
    out << '\n';
    auto rows = [&](const Matrix& z, const char* domain, const Labels& labels, const Vector& w) {
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            out << i << ',' << domain << ',' << labels[static_cast<std::size_t>(i)] << ',' << w[i];
            for (Eigen::Index j = 0; j < z.cols(); ++j) out << ',' << z(i, j);
            out << '\n';
        }
    };
    rows(z_s, "source", pair.source.labels, cluster.source_weights);
    rows(z_t, "target", cluster.assignments, cluster.target_weights);
}

void write_cluster_state(const std::filesystem::path& dir, int epoch, const ClusterState& cluster,
                         const SelectionState& selection) {
    std::filesystem::create_directories(dir);
    const std::string tag = epoch_tag(epoch);
    {
        std::ofstream out(dir / (tag + "_centroids.csv"));
        out.precision(17);
        out << "cluster,mean_weight,threshold";
        for (Eigen::Index j = 0; j < cluster.centroids.cols(); ++j) out << ",c" << j;
        out << '\n';
        for (Eigen::Index k = 0; k < cluster.centroids.rows(); ++k) {
            out << k << ',' << selection.cluster_means[k] << ',' << selection.thresholds[k];
            for (Eigen::Index j = 0; j < cluster.centroids.cols(); ++j) out << ',' << cluster.centroids(k, j);
            out << '\n';
        }
    }
    std::ofstream out(dir / (tag + "_samples.csv"));
    out.precision(17);
    out << "domain,sample_id,cluster,weight,positive\n";
    for (Eigen::Index i = 0; i < cluster.source_weights.size(); ++i)
        out << "source," << i << ",," << cluster.source_weights[i] << ",\n";
    for (Eigen::Index i = 0; i < cluster.target_weights.size(); ++i)
        out << "target," << i << ',' << cluster.assignments[static_cast<std::size_t>(i)] << ','
            << cluster.target_weights[i] << ',' << (selection.positive[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
}

TrainResult train(const RunConfig& config, const DomainPair& pair, const ModelPair& initial,
                  const std::filesystem::path& run_dir, const TrainHooks& hooks) {
    config.validate();
    const int k = pair.num_classes;
    if (initial.classifier.num_classes() != k) throw ConfigError("model class count does not match the dataset");
    if (initial.extractor.spec().input_dim != pair.input_dim())
        throw ConfigError("model input width does not match the dataset");
    const auto ns = static_cast<std::size_t>(pair.source.inputs.rows());
    const auto nt = static_cast<std::size_t>(pair.target.inputs.rows());
    if (ns == 0 || nt == 0) throw ArgumentError("training needs samples in both domains");

    const ObjectiveTerms terms = ObjectiveTerms::for_variant(config.variant);
    const std::vector<int> minority = minority_classes(config, k);

    std::ofstream batch_log;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        std::ofstream(run_dir / "config.txt") << describe(config);
        batch_log.open(run_dir / "batches.csv");
        batch_log.precision(17);
        batch_log << "epoch,batch,lambda,learning_rate,n_source,n_target,n_positive," << csv_header_losses() << '\n';
    }

    TrainResult result{initial, {}, {}, {}, false};
    ModelPair& model = result.model;
    auto rng = stream_rng(config.seed, 101);
    IndexStream source_stream(ns, rng);
    IndexStream target_stream(nt, rng);
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), ns);
    const std::size_t bt = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), nt);
    const std::size_t batches =
        (std::max(ns, nt) + static_cast<std::size_t>(config.batch_size) - 1) / static_cast<std::size_t>(config.batch_size);
    SgdMomentum opt_f(config.momentum, config.weight_decay);
    SgdMomentum opt_g(config.momentum, config.weight_decay);

    std::optional<Matrix> previous_centroids;
    SelectionState selection;
    double best_source_loss = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double progress = static_cast<double>(epoch - 1) / config.epochs;
        const double lambda = lambda_schedule(progress);
        const double lr = lr_schedule(progress, config.learning_rate);
        const bool warmup = epoch <= config.warmup_epochs;

        ClusterState cluster =
            refresh_cluster_state(model, pair, config.kmeans, previous_centroids ? &*previous_centroids : nullptr);
        previous_centroids = cluster.centroids;
        if (terms.selection && !warmup)
            selection = update_selection(cluster.target_weights, cluster.assignments, k, &selection);
        else
            selection = warmup_selection(cluster.target_weights, cluster.assignments, k);

        RowVector dataset_mass;
        if (terms.target && config.auxiliary_scope == AuxiliaryScope::dataset)
            dataset_mass = normalize_class_probs(
                               classify(model.classifier, extract_features(model.extractor, pair.target.inputs)))
                               .colwise()
                               .sum();

        if (hooks.on_epoch_start) hooks.on_epoch_start({epoch, warmup, cluster, selection});
        if (config.export_cluster_state && !run_dir.empty())
            write_cluster_state(run_dir / "cluster_state", epoch, cluster, selection);

        LossBreakdown epoch_losses;
        for (std::size_t b = 0; b < batches; ++b) {
            const auto idx_s = source_stream.next(bs);
            const auto idx_t = target_stream.next(bt);
            const Matrix x_s = gather_rows(pair.source.inputs, idx_s);
            const Matrix x_t = gather_rows(pair.target.inputs, idx_t);

            BatchTargets t;
            t.source_labels = gather(pair.source.labels, idx_s);
            t.source_weights = gather(cluster.source_weights, idx_s);
            t.target_weights = gather(cluster.target_weights, idx_t);
            t.target_positive = gather(selection.positive, idx_t);
            const Labels batch_assign = gather(cluster.assignments, idx_t);

            const ForwardPass fp = forward_pass(model, x_s, x_t);
            if (terms.target)
                t.q = config.auxiliary_scope == AuxiliaryScope::dataset
                          ? update_auxiliary_distribution(fp.pn_target, dataset_mass, config.auxiliary_form)
                          : update_auxiliary_distribution(fp.pn_target, config.auxiliary_form);

            const LossBreakdown losses = evaluate_objectives(fp, t, terms, lambda);
            if (!finite(losses)) abort_non_finite(epoch, b, losses);
            if (hooks.on_batch)
                hooks.on_batch({epoch, b, warmup, terms, fp, t, batch_assign, selection.thresholds, losses});

            // Discriminator/classifier step with the extractor fixed, then the extractor step
            // against the updated classifier.
            opt_g.step(model.classifier.net().layers(), classifier_gradient(model, fp, t, terms, lambda),
                       lr * config.task_lr_multiplier);
            const ForwardPass fp_after = forward_pass(model, x_s, x_t);
            opt_f.step(model.extractor.net().layers(), extractor_gradient(model, fp_after, t, terms, lambda), lr);

            add_into(epoch_losses, losses);
            if (batch_log.is_open()) {
                const auto positives = std::count(t.target_positive.begin(), t.target_positive.end(), true);
                batch_log << epoch << ',' << b << ',' << lambda << ',' << lr << ',' << idx_s.size() << ','
                          << idx_t.size() << ',' << positives << ',' << csv_row_losses(losses) << '\n';
            }
        }
        scale(epoch_losses, 1.0 / static_cast<double>(batches));
        epoch_losses.lambda = lambda;

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lambda = lambda;
        rec.learning_rate = lr;
        rec.batches = batches;
        rec.losses = epoch_losses;
        rec.source_accuracy = evaluate(model, pair.source.inputs, pair.source.labels).accuracy;
        if (pair.target_eval_labels) {
            const Evaluation ev = evaluate(model, pair.target.inputs, *pair.target_eval_labels);
            rec.target_accuracy = ev.accuracy;
            rec.per_class_accuracy = ev.per_class_accuracy;
            if (!minority.empty()) rec.minority_accuracy = mean_class_accuracy(ev, minority);
            rec.cluster_purity = cluster_purity(cluster.assignments, *pair.target_eval_labels);
        } else {
            rec.target_accuracy = std::numeric_limits<double>::quiet_NaN();
            rec.cluster_purity = std::numeric_limits<double>::quiet_NaN();
        }
        rec.thresholds.assign(selection.thresholds.data(), selection.thresholds.data() + selection.thresholds.size());
        rec.mean_threshold = selection.thresholds.mean();
        rec.positive_count = selection.positive_count;
        rec.negative_count = selection.negative_count;
        rec.empty_clusters = cluster.empty_clusters;
        rec.kmeans_iterations = cluster.kmeans_iterations;
        rec.kmeans_converged = cluster.kmeans_converged;
        result.log.append(std::move(rec));

        result.cluster = std::move(cluster);
        result.selection = selection;

        if (!run_dir.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
            save_checkpoint(run_dir / "checkpoints" / (epoch_tag(epoch) + ".json"), model, {{"epoch", epoch}});

        if (config.early_stopping_patience > 0) {
            if (epoch_losses.dis_s < best_source_loss) {
                best_source_loss = epoch_losses.dis_s;
                stale_epochs = 0;
            } else if (++stale_epochs >= config.early_stopping_patience) {
                result.early_stopped = true;
                spdlog::info("early stopping after epoch {}", epoch);
                break;
            }
        }
    }

    if (!run_dir.empty()) {
        const int last = result.log.empty() ? 0 : result.log.records().back().epoch;
        save_checkpoint(run_dir / "checkpoints" / "final.json", model, {{"epoch", last}});
        result.log.write_csv(run_dir / "metrics.csv");
        result.log.write_jsonl(run_dir / "metrics.jsonl");
        if (config.export_embeddings) write_embeddings_csv(run_dir / "embeddings.csv", model, pair, result.cluster);
    }
    return result;
}

TrainResult train(const RunConfig& config, const DomainPair& pair, const std::filesystem::path& run_dir,
                  const TrainHooks& hooks) {
    config.validate();
    return train(config, pair, pretrain_source(config, pair), run_dir, hooks);
}

}  // namespace avatar
