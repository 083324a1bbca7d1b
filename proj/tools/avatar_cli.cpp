// Command-line front end: pretrain, train, evaluate, suite, traces, export-embeddings.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "avatar/checkpoint.hpp"
#include "avatar/config.hpp"
#include "avatar/experiments.hpp"
#include "avatar/trainer.hpp"

namespace fs = std::filesystem;
using namespace avatar;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> set;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    std::optional<int> epochs;
    std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config, "Suite configuration file (key = value)")->required()->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", o.set, "Override a config entry, e.g. --set epochs=50 (repeatable)");
    cmd->add_option("--seed", o.seed, "Override the run seed");
    cmd->add_option("--variant", o.variant, "Override the variant (source, variant1, variant2, avatar)");
    cmd->add_option("--epochs", o.epochs, "Override the epoch count");
    cmd->add_option("-o,--output-dir", o.output_dir, "Override the output directory");
}

ExperimentSuite load_suite(const CommonOptions& o) {
    Settings overrides;
    for (const auto& kv : o.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) overrides.emplace_back("seed", std::to_string(*o.seed));
    if (o.variant) overrides.emplace_back("variant", *o.variant);
    if (o.epochs) overrides.emplace_back("epochs", std::to_string(*o.epochs));
    if (o.output_dir) overrides.emplace_back("output_dir", *o.output_dir);
    return parse_config(o.config, overrides);
}

void print_eval(const char* domain, const Evaluation& e) {
    std::cout << domain << " accuracy: " << e.accuracy << " (" << e.count << " samples)\n";
    for (std::size_t c = 0; c < e.per_class_accuracy.size(); ++c)
        if (!std::isnan(e.per_class_accuracy[c])) std::cout << "  class " << c << ": " << e.per_class_accuracy[c] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustering-guided adversarial domain adaptation trainer"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

    CommonOptions pre_o, train_o, eval_o, suite_o, export_o;

    auto* pre = app.add_subcommand("pretrain", "Train on labeled source data only and save a checkpoint");
    add_common(pre, pre_o);
    std::string pre_out;
    pre->add_option("--checkpoint", pre_out, "Output checkpoint (default <output_dir>/pretrained.json)");

    auto* tr = app.add_subcommand("train", "Run one adaptation run (first variant and seed of the config)");
    add_common(tr, train_o);
    std::string init_ckpt, run_dir;
    bool tr_embeddings = false, tr_cluster = false;
    tr->add_option("--init-checkpoint", init_ckpt, "Start from this checkpoint instead of pretraining")->check(CLI::ExistingFile);
    tr->add_option("--run-dir", run_dir, "Run directory (default <output_dir>/<name>__<variant>__seed<seed>)");
    tr->add_flag("--export-embeddings", tr_embeddings, "Write final embeddings.csv");
    tr->add_flag("--export-cluster-state", tr_cluster, "Write per-epoch cluster state CSVs");

    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on the configured dataset");
    add_common(ev, eval_o);
    std::string eval_ckpt;
    ev->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);

    auto* su = app.add_subcommand("suite", "Run every task x variant x seed and aggregate");
    add_common(su, suite_o);
    int jobs = 1;
    bool su_plots = false;
    su->add_option("-j,--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    su->add_flag("--plots", su_plots, "Render SVG trace plots");

    auto* tc = app.add_subcommand("traces", "Aggregate per-epoch threshold/accuracy traces from run directories");
    std::vector<std::string> trace_runs;
    std::string trace_out = "traces", trace_filter, trace_stem = "traces";
    bool tc_plots = false;
    tc->add_option("runs", trace_runs, "Run directories, or suite directories containing them")->required();
    tc->add_option("--out", trace_out, "Output directory");
    tc->add_option("--filter", trace_filter, "Only use run directories whose name contains this string");
    tc->add_option("--stem", trace_stem, "Output file stem");
    tc->add_flag("--plots", tc_plots, "Render SVG plots");

    auto* ex = app.add_subcommand("export-embeddings", "Write embeddings, cluster labels and weights for a checkpoint");
    add_common(ex, export_o);
    std::string ex_ckpt, ex_out = "embeddings.csv";
    ex->add_option("--checkpoint", ex_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", ex_out, "Output CSV");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));
    spdlog::set_pattern("[%l] %v");

    try {
        if (*pre) {
            const auto suite = load_suite(pre_o);
            const DomainPair pair = make_dataset(suite.base.dataset);
            const ModelPair model = pretrain_source(suite.base, pair);
            const fs::path out = pre_out.empty() ? suite.base.output_dir / "pretrained.json" : fs::path(pre_out);
            save_checkpoint(out, model, {{"pretrain_epochs", suite.base.pretrain_epochs}});
            print_eval("source", evaluate(model, pair.source.inputs, pair.source.labels));
            if (pair.target_eval_labels) print_eval("target", evaluate(model, pair.target.inputs, *pair.target_eval_labels));
            std::cout << "checkpoint: " << out.string() << '\n';
        } else if (*tr) {
            auto suite = load_suite(train_o);
            RunConfig config = suite.base;
            config.export_embeddings = config.export_embeddings || tr_embeddings;
            config.export_cluster_state = config.export_cluster_state || tr_cluster;
            const DomainPair pair = make_dataset(config.dataset);
            const fs::path dir = run_dir.empty() ? config.output_dir / (suite.name + "__" + to_string(config.variant) +
                                                                        "__seed" + std::to_string(config.seed))
                                                 : fs::path(run_dir);
            const TrainResult result = init_ckpt.empty() ? train(config, pair, dir)
                                                         : train(config, pair, load_checkpoint(init_ckpt), dir);
            const auto& last = result.log.records().back();
            std::cout << "epochs: " << result.log.size() << "\nfinal target accuracy: " << last.target_accuracy
                      << "\nrun directory: " << dir.string() << '\n';
        } else if (*ev) {
            const auto suite = load_suite(eval_o);
            const DomainPair pair = make_dataset(suite.base.dataset);
            const ModelPair model = load_checkpoint(eval_ckpt);
            print_eval("source", evaluate(model, pair.source.inputs, pair.source.labels));
            if (pair.target_eval_labels) {
                const Evaluation e = evaluate(model, pair.target.inputs, *pair.target_eval_labels);
                print_eval("target", e);
                const auto minority = minority_classes(suite.base, pair.num_classes);
                if (!minority.empty()) std::cout << "minority accuracy: " << mean_class_accuracy(e, minority) << '\n';
            }
        } else if (*su) {
            const auto suite = load_suite(suite_o);
            SuiteOptions opts;
            opts.jobs = jobs;
            opts.plots = su_plots;
            const SuiteReport report = run_suite(suite, opts);
            std::cout << report_markdown(report) << "report: " << (suite.output_dir() / "report.md").string() << '\n';
            for (const auto& r : report.runs)
                if (!r.ok) return 2;
        } else if (*tc) {
            std::vector<MetricsLog> logs;
            auto consider = [&](const fs::path& dir) {
                if (!trace_filter.empty() && dir.filename().string().find(trace_filter) == std::string::npos) return;
                if (fs::exists(dir / "metrics.jsonl")) logs.push_back(MetricsLog::read_jsonl(dir / "metrics.jsonl"));
            };
            for (const auto& r : trace_runs) {
                const fs::path p(r);
                if (fs::exists(p / "metrics.jsonl")) {
                    consider(p);
                    continue;
                }
                if (!fs::is_directory(p)) throw ArgumentError("not a directory: " + r);
                std::vector<fs::path> children;
                for (const auto& entry : fs::directory_iterator(p))
                    if (entry.is_directory()) children.push_back(entry.path());
                std::sort(children.begin(), children.end());
                for (const auto& c : children) consider(c);
            }
            emit_traces(logs, trace_out, tc_plots, trace_stem);
            std::cout << "traces from " << logs.size() << " run(s): " << (fs::path(trace_out) / (trace_stem + ".csv")).string()
                      << '\n';
        } else if (*ex) {
            const auto suite = load_suite(export_o);
            const DomainPair pair = make_dataset(suite.base.dataset);
            const ModelPair model = load_checkpoint(ex_ckpt);
            const ClusterState state = refresh_cluster_state(model, pair, suite.base.kmeans);
            write_embeddings_csv(ex_out, model, pair, state);
            std::cout << "embeddings: " << ex_out << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
