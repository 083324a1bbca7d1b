#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "avatar/config.hpp"
#include "avatar/metrics.hpp"

namespace avatar {

struct RunSpec {
    std::string run_id;  // <task>__<variant>__seed<seed>
    std::string task;
    RunConfig config;
};

/// Tasks x variants x seeds, in that nesting order.
std::vector<RunSpec> expand_suite(const ExperimentSuite& suite);

struct RunOutcome {
    RunSpec spec;
    bool ok = false;
    std::string error;
    MetricsLog log;
};

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 when n < 2
};

Summary summarize(const std::vector<double>& values);

/// Half width of the two-sided 95% Student-t interval of the mean (0 when n < 2).
double ci95_half_width(const std::vector<double>& values);

struct ReportRow {
    std::string task;
    Variant variant = Variant::avatar;
    std::size_t failed = 0;
    Summary accuracy;
    std::optional<Summary> minority_accuracy;
};

struct SuiteReport {
    std::vector<ReportRow> rows;
    std::vector<RunOutcome> runs;

    const ReportRow* find(const std::string& task, Variant variant) const;
};

/// Groups completed runs by (task, variant) using each run's final-epoch metrics.
SuiteReport aggregate(std::vector<RunOutcome> runs);

using RunFunction = std::function<MetricsLog(const RunSpec&, const DomainPair&, const std::filesystem::path& run_dir)>;

/// Default runner: source pretraining followed by train().
MetricsLog default_run(const RunSpec& spec, const DomainPair& pair, const std::filesystem::path& run_dir);

struct SuiteOptions {
    int jobs = 1;
    bool write_files = true;
    bool plots = false;
    RunFunction runner = default_run;
};

/// Runs every expanded run (failed runs are recorded, not fatal) and writes raw logs plus
/// report.csv / report.md / traces under the suite output directory.
SuiteReport run_suite(const ExperimentSuite& suite, const SuiteOptions& options = {});

void write_report(const SuiteReport& report, const std::filesystem::path& dir);
std::string report_markdown(const SuiteReport& report);
std::string report_csv(const SuiteReport& report);

struct TracePoint {
    int epoch = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double low = 0.0;
    double high = 0.0;
};

/// Per-epoch mean and 95% interval of `metric` across logs (epochs present in every log).
std::vector<TracePoint> trace(const std::vector<MetricsLog>& logs, const std::function<double(const EpochRecord&)>& metric);

/// Writes <stem>.csv (epoch, threshold_mean/low/high, accuracy_mean/low/high, runs) and, when
/// `plots` is set, <stem>_threshold.svg and <stem>_accuracy.svg.
void emit_traces(const std::vector<MetricsLog>& logs, const std::filesystem::path& dir, bool plots = false,
                 const std::string& stem = "traces");

std::string render_trace_svg(const std::vector<TracePoint>& points, const std::string& title,
                             const std::string& y_label);

}  // namespace avatar
