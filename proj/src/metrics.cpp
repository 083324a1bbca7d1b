#include "avatar/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace avatar {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

double number_or_nan(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string num(double x) {
    if (std::isnan(x)) return "";
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

template <typename T>
std::string joined(const std::vector<T>& xs) {
    std::ostringstream os;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) os << ';';
        if constexpr (std::is_floating_point_v<T>)
            os << num(xs[i]);
        else
            os << xs[i];
    }
    return os.str();
}

}  // namespace

Evaluation evaluate_predictions(const Labels& predicted, const Labels& truth, int num_classes) {
    if (predicted.size() != truth.size()) throw ArgumentError("prediction and label counts differ");
    Evaluation e;
    e.count = truth.size();
    e.confusion.assign(static_cast<std::size_t>(num_classes), std::vector<std::size_t>(static_cast<std::size_t>(num_classes), 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int y = truth[i];
        const int p = predicted[i];
        if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) throw ArgumentError("class index out of range");
        ++e.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
        correct += y == p;
    }
    e.accuracy = truth.empty() ? kNaN : static_cast<double>(correct) / static_cast<double>(truth.size());
    for (int c = 0; c < num_classes; ++c) {
        std::size_t total = 0;
        for (auto v : e.confusion[static_cast<std::size_t>(c)]) total += v;
        e.per_class_accuracy.push_back(total == 0 ? kNaN
                                                  : static_cast<double>(e.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
                                                        static_cast<double>(total));
    }
    return e;
}

Evaluation evaluate(const ModelPair& model, const Matrix& inputs, const Labels& truth) {
    const int k = model.classifier.num_classes();
    const Matrix p = classify(model.classifier, extract_features(model.extractor, inputs));
    return evaluate_predictions(predict_classes(p, k), truth, k);
}

double mean_class_accuracy(const Evaluation& eval, const std::vector<int>& classes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int c : classes) {
        const double a = eval.per_class_accuracy.at(static_cast<std::size_t>(c));
        if (std::isnan(a)) continue;
        sum += a;
        ++n;
    }
    return n == 0 ? kNaN : sum / static_cast<double>(n);
}

double cluster_purity(const Labels& assignments, const Labels& truth) {
    if (assignments.size() != truth.size()) throw ArgumentError("assignment and label counts differ");
    if (truth.empty()) return kNaN;
    std::size_t match = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) match += assignments[i] == truth[i];
    return static_cast<double>(match) / static_cast<double>(truth.size());
}

nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json per_class = nlohmann::json::array();
    for (double a : r.per_class_accuracy) per_class.push_back(number_or_null(a));
    return {
        {"epoch", r.epoch},
        {"lambda", r.lambda},
        {"learning_rate", r.learning_rate},
        {"source_accuracy", number_or_null(r.source_accuracy)},
        {"target_accuracy", number_or_null(r.target_accuracy)},
        {"per_class_accuracy", per_class},
        {"minority_accuracy", r.minority_accuracy ? number_or_null(*r.minority_accuracy) : nlohmann::json(nullptr)},
        {"cluster_purity", number_or_null(r.cluster_purity)},
        {"thresholds", r.thresholds},
        {"mean_threshold", r.mean_threshold},
        {"positive_count", r.positive_count},
        {"negative_count", r.negative_count},
        {"empty_clusters", r.empty_clusters},
        {"kmeans_iterations", r.kmeans_iterations},
        {"kmeans_converged", r.kmeans_converged},
        {"batches", r.batches},
        {"losses",
         {{"adv_g", r.losses.adv_g},
          {"adv_f", r.losses.adv_f},
          {"dis_t", r.losses.dis_t},
          {"dis_s", r.losses.dis_s},
          {"dis", r.losses.dis},
          {"total_f", r.losses.total_f},
          {"total_g", r.losses.total_g}}},
    };
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.lambda = j.at("lambda").get<double>();
    r.learning_rate = j.at("learning_rate").get<double>();
    r.source_accuracy = number_or_nan(j.at("source_accuracy"));
    r.target_accuracy = number_or_nan(j.at("target_accuracy"));
    for (const auto& a : j.at("per_class_accuracy")) r.per_class_accuracy.push_back(number_or_nan(a));
    if (!j.at("minority_accuracy").is_null()) r.minority_accuracy = j.at("minority_accuracy").get<double>();
    r.cluster_purity = number_or_nan(j.at("cluster_purity"));
    r.thresholds = j.at("thresholds").get<std::vector<double>>();
    r.mean_threshold = j.at("mean_threshold").get<double>();
    r.positive_count = j.at("positive_count").get<std::size_t>();
    r.negative_count = j.at("negative_count").get<std::size_t>();
    r.empty_clusters = j.at("empty_clusters").get<std::vector<int>>();
    r.kmeans_iterations = j.at("kmeans_iterations").get<int>();
    r.kmeans_converged = j.at("kmeans_converged").get<bool>();
    r.batches = j.at("batches").get<std::size_t>();
    const auto& l = j.at("losses");
    r.losses.adv_g = l.at("adv_g").get<double>();
    r.losses.adv_f = l.at("adv_f").get<double>();
    r.losses.dis_t = l.at("dis_t").get<double>();
    r.losses.dis_s = l.at("dis_s").get<double>();
    r.losses.dis = l.at("dis").get<double>();
    r.losses.total_f = l.at("total_f").get<double>();
    r.losses.total_g = l.at("total_g").get<double>();
    r.losses.lambda = r.lambda;
    return r;
}

void MetricsLog::append(EpochRecord record) {
    if (!records_.empty() && record.epoch <= records_.back().epoch)
        throw ArgumentError("metrics log epochs must increase");
    records_.push_back(std::move(record));
}

std::string csv_header_losses() { return "adv_g,adv_f,dis_t,dis_s,dis,total_f,total_g"; }

std::string csv_row_losses(const LossBreakdown& b) {
    return num(b.adv_g) + ',' + num(b.adv_f) + ',' + num(b.dis_t) + ',' + num(b.dis_s) + ',' + num(b.dis) + ',' +
           num(b.total_f) + ',' + num(b.total_g);
}

std::string MetricsLog::to_csv() const {
    std::ostringstream os;
    os << "epoch,lambda,learning_rate,source_accuracy,target_accuracy,minority_accuracy,cluster_purity,"
          "mean_threshold,positive_count,negative_count,kmeans_iterations,kmeans_converged,empty_clusters,"
          "thresholds,per_class_accuracy,batches,"
       << csv_header_losses() << '\n';
    for (const auto& r : records_) {
        os << r.epoch << ',' << num(r.lambda) << ',' << num(r.learning_rate) << ',' << num(r.source_accuracy) << ','
           << num(r.target_accuracy) << ',' << (r.minority_accuracy ? num(*r.minority_accuracy) : "") << ','
           << num(r.cluster_purity) << ',' << num(r.mean_threshold) << ',' << r.positive_count << ','
           << r.negative_count << ',' << r.kmeans_iterations << ',' << (r.kmeans_converged ? 1 : 0) << ','
           << joined(r.empty_clusters) << ',' << joined(r.thresholds) << ',' << joined(r.per_class_accuracy) << ','
           << r.batches << ',' << csv_row_losses(r.losses) << '\n';
    }
    return os.str();
}

std::string MetricsLog::to_jsonl() const {
    std::string out;
    for (const auto& r : records_) out += to_json(r).dump() + '\n';
    return out;
}

void MetricsLog::write_csv(const std::filesystem::path& file) const {
    std::ofstream f(file);
    if (!f) throw Error("cannot write " + file.string());
    f << to_csv();
}

void MetricsLog::write_jsonl(const std::filesystem::path& file) const {
    std::ofstream f(file);
    if (!f) throw Error("cannot write " + file.string());
    f << to_jsonl();
}

MetricsLog MetricsLog::read_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ArgumentError("cannot read metrics log " + file.string());
    MetricsLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        log.append(epoch_record_from_json(nlohmann::json::parse(line)));
    }
    return log;
}

}  // namespace avatar
