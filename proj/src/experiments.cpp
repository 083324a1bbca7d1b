#include "avatar/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <spdlog/spdlog.h>

#include "avatar/trainer.hpp"

namespace avatar {

namespace {

std::string percent_tag(double fraction) {
    std::ostringstream os;
    os << "phi" << std::llround(fraction * 100.0);
    return os.str();
}

std::string num(double x) {
    if (std::isnan(x)) return "";
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

std::string pct(double x) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << 100.0 * x;
    return os.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    out << text;
}

}  // namespace

std::vector<RunSpec> expand_suite(const ExperimentSuite& suite) {
    struct Task {
        std::string name;
        RunConfig config;
    };
    std::vector<Task> tasks;
    if (suite.imbalance_fractions.empty()) {
        tasks.push_back({suite.name, suite.base});
    } else {
        for (double f : suite.imbalance_fractions) {
            RunConfig c = suite.base;
            if (!c.dataset.imbalance) c.dataset.imbalance = ImbalanceSpec{};
            c.dataset.imbalance->minority_fraction = f;
            tasks.push_back({suite.name + "_" + percent_tag(f), c});
        }
    }
    std::vector<RunSpec> runs;
    for (const auto& task : tasks)
        for (Variant v : suite.variants)
            for (auto seed : suite.seeds) {
                RunSpec r{task.name + "__" + to_string(v) + "__seed" + std::to_string(seed), task.name, task.config};
                r.config.variant = v;
                r.config.seed = seed;
                runs.push_back(std::move(r));
            }
    return runs;
}

Summary summarize(const std::vector<double>& values) {
    Summary s;
    s.n = values.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n < 2) return s;
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(s.n - 1));
    return s;
}

double ci95_half_width(const std::vector<double>& values) {
    const Summary s = summarize(values);
    if (s.n < 2) return 0.0;
    const boost::math::students_t dist(static_cast<double>(s.n - 1));
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    return t * s.std / std::sqrt(static_cast<double>(s.n));
}

const ReportRow* SuiteReport::find(const std::string& task, Variant variant) const {
    for (const auto& r : rows)
        if (r.task == task && r.variant == variant) return &r;
    return nullptr;
}

SuiteReport aggregate(std::vector<RunOutcome> runs) {
    SuiteReport report;
    std::vector<std::pair<std::string, Variant>> order;
    struct Acc {
        std::size_t failed = 0;
        std::vector<double> accuracy;
        std::vector<double> minority;
    };
    std::map<std::pair<std::string, int>, Acc> groups;
    for (const auto& run : runs) {
        const auto key = std::make_pair(run.spec.task, static_cast<int>(run.spec.config.variant));
        if (!groups.count(key)) order.emplace_back(run.spec.task, run.spec.config.variant);
        auto& g = groups[key];
        if (!run.ok || run.log.empty()) {
            ++g.failed;
            continue;
        }
        const auto& last = run.log.records().back();
        if (!std::isnan(last.target_accuracy)) g.accuracy.push_back(last.target_accuracy);
        if (last.minority_accuracy && !std::isnan(*last.minority_accuracy)) g.minority.push_back(*last.minority_accuracy);
    }
    for (const auto& [task, variant] : order) {
        const auto& g = groups[{task, static_cast<int>(variant)}];
        ReportRow row;
        row.task = task;
        row.variant = variant;
        row.failed = g.failed;
        row.accuracy = summarize(g.accuracy);
        if (!g.minority.empty()) row.minority_accuracy = summarize(g.minority);
        if (g.failed > 0)
            spdlog::warn("{} / {}: {} failed run(s) excluded from aggregation", task, to_string(variant), g.failed);
        report.rows.push_back(row);
    }
    report.runs = std::move(runs);
    return report;
}

MetricsLog default_run(const RunSpec& spec, const DomainPair& pair, const std::filesystem::path& run_dir) {
    return train(spec.config, pair, run_dir).log;
}

SuiteReport run_suite(const ExperimentSuite& suite, const SuiteOptions& options) {
    const auto specs = expand_suite(suite);
    const auto out_dir = suite.output_dir();
    if (options.write_files) std::filesystem::create_directories(out_dir);

    std::map<std::string, DomainPair> datasets;
    for (const auto& s : specs)
        if (!datasets.count(s.task)) datasets.emplace(s.task, make_dataset(s.config.dataset));

    std::vector<RunOutcome> outcomes(specs.size());
    auto run_one = [&](std::size_t i) {
        RunOutcome& o = outcomes[i];
        o.spec = specs[i];
        try {
            const auto run_dir = options.write_files ? out_dir / specs[i].run_id : std::filesystem::path{};
            o.log = options.runner(specs[i], datasets.at(specs[i].task), run_dir);
            o.ok = true;
            spdlog::info("{}: done", specs[i].run_id);
        } catch (const std::exception& e) {
            o.ok = false;
            o.error = e.what();
            spdlog::warn("{}: failed: {}", specs[i].run_id, e.what());
        }
    };

    const int jobs = std::max(1, options.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> workers;
        for (int w = 0; w < jobs; ++w)
            workers.push_back(std::async(std::launch::async, [&] {
                for (std::size_t i = next++; i < specs.size(); i = next++) run_one(i);
            }));
        for (auto& w : workers) w.get();
    }

    SuiteReport report = aggregate(std::move(outcomes));
    if (options.write_files) {
        write_report(report, out_dir);
        std::map<std::string, std::vector<MetricsLog>> by_group;
        for (const auto& r : report.runs)
            if (r.ok && !r.log.empty()) by_group[r.spec.task + "__" + to_string(r.spec.config.variant)].push_back(r.log);
        for (const auto& [group, logs] : by_group) emit_traces(logs, out_dir / "traces", options.plots, group);
    }
    return report;
}

std::string report_csv(const SuiteReport& report) {
    std::ostringstream os;
    os << "task,variant,runs,failed,accuracy_mean,accuracy_std,minority_accuracy_mean,minority_accuracy_std\n";
    for (const auto& r : report.rows) {
        os << r.task << ',' << to_string(r.variant) << ',' << r.accuracy.n << ',' << r.failed << ','
           << num(r.accuracy.mean) << ',' << num(r.accuracy.std) << ','
           << (r.minority_accuracy ? num(r.minority_accuracy->mean) : "") << ','
           << (r.minority_accuracy ? num(r.minority_accuracy->std) : "") << '\n';
    }
    return os.str();
}

std::string report_markdown(const SuiteReport& report) {
    std::ostringstream os;
    os << "| task | variant | runs | accuracy (%) | minority accuracy (%) |\n";
    os << "|---|---|---|---|---|\n";
    for (const auto& r : report.rows) {
        os << "| " << r.task << " | " << to_string(r.variant) << " | " << r.accuracy.n;
        if (r.failed) os << " (+" << r.failed << " failed)";
        os << " | " << pct(r.accuracy.mean) << " ± " << pct(r.accuracy.std) << " | ";
        if (r.minority_accuracy) os << pct(r.minority_accuracy->mean) << " ± " << pct(r.minority_accuracy->std);
        os << " |\n";
    }
    return os.str();
}

void write_report(const SuiteReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.csv", report_csv(report));
    write_text(dir / "report.md", report_markdown(report));
    std::ofstream runs(dir / "runs.csv");
    runs << "run_id,task,variant,seed,status,final_target_accuracy,final_minority_accuracy,error\n";
    for (const auto& r : report.runs) {
        runs << r.spec.run_id << ',' << r.spec.task << ',' << to_string(r.spec.config.variant) << ','
             << r.spec.config.seed << ',' << (r.ok ? "ok" : "failed") << ',';
        if (r.ok && !r.log.empty()) {
            const auto& last = r.log.records().back();
            runs << num(last.target_accuracy) << ',' << (last.minority_accuracy ? num(*last.minority_accuracy) : "");
        } else {
            runs << ',';
        }
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        runs << ',' << err << '\n';
    }
}

std::vector<TracePoint> trace(const std::vector<MetricsLog>& logs, const std::function<double(const EpochRecord&)>& metric) {
    std::vector<TracePoint> out;
    if (logs.empty()) return out;
    std::size_t epochs = logs.front().size();
    for (const auto& l : logs) epochs = std::min(epochs, l.size());
    for (std::size_t e = 0; e < epochs; ++e) {
        std::vector<double> values;
        for (const auto& l : logs) {
            const double v = metric(l.records()[e]);
            if (!std::isnan(v)) values.push_back(v);
        }
        TracePoint p;
        p.epoch = logs.front().records()[e].epoch;
        p.n = values.size();
        if (values.empty()) {
            p.mean = p.low = p.high = std::numeric_limits<double>::quiet_NaN();
        } else {
            const Summary s = summarize(values);
            const double h = ci95_half_width(values);
            p.mean = s.mean;
            p.low = s.mean - h;
            p.high = s.mean + h;
        }
        out.push_back(p);
    }
    return out;
}

void emit_traces(const std::vector<MetricsLog>& logs, const std::filesystem::path& dir, bool plots,
                 const std::string& stem) {
    if (logs.empty()) throw ArgumentError("traces need at least one completed run");
    std::filesystem::create_directories(dir);
    const auto tau = trace(logs, [](const EpochRecord& r) { return r.mean_threshold; });
    const auto acc = trace(logs, [](const EpochRecord& r) { return r.target_accuracy; });
    std::ostringstream os;
    os << "epoch,threshold_mean,threshold_low,threshold_high,accuracy_mean,accuracy_low,accuracy_high,runs\n";
    for (std::size_t i = 0; i < tau.size(); ++i)
        os << tau[i].epoch << ',' << num(tau[i].mean) << ',' << num(tau[i].low) << ',' << num(tau[i].high) << ','
           << num(acc[i].mean) << ',' << num(acc[i].low) << ',' << num(acc[i].high) << ',' << tau[i].n << '\n';
    write_text(dir / (stem + ".csv"), os.str());
    if (plots) {
        write_text(dir / (stem + "_threshold.svg"), render_trace_svg(tau, stem + ": mean threshold", "mean tau"));
        write_text(dir / (stem + "_accuracy.svg"), render_trace_svg(acc, stem + ": target accuracy", "accuracy"));
    }
}

std::string render_trace_svg(const std::vector<TracePoint>& points, const std::string& title,
                             const std::string& y_label) {
    constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    int e0 = 0, e1 = 1;
    for (const auto& p : points) {
        if (std::isnan(p.mean)) continue;
        lo = std::min(lo, p.low);
        hi = std::max(hi, p.high);
    }
    if (!points.empty()) {
        e0 = points.front().epoch;
        e1 = std::max(points.back().epoch, e0 + 1);
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-9) lo -= 0.5, hi += 0.5;
    auto x = [&](double e) { return L + (e - e0) / (e1 - e0) * (W - L - R); };
    auto y = [&](double v) { return T + (hi - v) / (hi - lo) * (H - T - B); };

    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n"
       << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n"
       << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
       << ")\" text-anchor=\"middle\" font-size=\"12\">" << y_label << "</text>\n"
       << "<text x=\"" << L - 6 << "\" y=\"" << y(hi) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << hi << "</text>\n"
       << "<text x=\"" << L - 6 << "\" y=\"" << y(lo) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << lo << "</text>\n"
       << "<text x=\"" << L << "\" y=\"" << H - B + 14 << "\" font-size=\"10\">" << e0 << "</text>\n"
       << "<text x=\"" << W - R << "\" y=\"" << H - B + 14 << "\" text-anchor=\"end\" font-size=\"10\">" << e1 << "</text>\n";
    std::ostringstream band, line;
    bool first = true;
    for (const auto& p : points) {
        if (std::isnan(p.mean)) continue;
        band << x(p.epoch) << ',' << y(p.high) << ' ';
        line << (first ? "M" : " L") << x(p.epoch) << ',' << y(p.mean);
        first = false;
    }
    for (auto it = points.rbegin(); it != points.rend(); ++it)
        if (!std::isnan(it->mean)) band << x(it->epoch) << ',' << y(it->low) << ' ';
    os << "<polygon points=\"" << band.str() << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n"
       << "<path d=\"" << line.str() << "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\"/>\n"
       << "</svg>\n";
    return os.str();
}

}  // namespace avatar
