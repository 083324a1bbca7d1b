#include "avatar/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace avatar {

namespace {

std::mt19937_64 domain_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::vector<int> balanced_counts(int n, int k) {
    std::vector<int> counts(static_cast<std::size_t>(k), n / k);
    for (int c = 0; c < n % k; ++c) ++counts[static_cast<std::size_t>(c)];
    return counts;
}

LabeledDataset sample_moons(int n, double noise, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, 1.0);
    LabeledDataset out{Matrix(n, 2), Labels(static_cast<std::size_t>(n))};
    const auto counts = balanced_counts(n, 2);
    Eigen::Index row = 0;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
            const double t = angle(rng);
            double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
            double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
            // Center on the origin so rotation turns the whole task.
            x -= 0.5;
            y -= 0.25;
            x += noise * jitter(rng);
            y += noise * jitter(rng);
            out.inputs(row, 0) = x;
            out.inputs(row, 1) = y;
            out.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return out;
}

std::size_t round_half_up(double x) {
    // The epsilon absorbs representation error such as 0.05 * 90 = 4.4999...
    return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

std::vector<std::size_t> sorted_subset(const std::vector<std::size_t>& pool, std::size_t keep,
                                       std::mt19937_64& rng) {
    std::vector<std::size_t> chosen = pool;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(std::min(keep, chosen.size()));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::vector<double> read_feature_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ArgumentError("missing feature file: " + file.string());
    std::vector<double> values;
    std::string token;
    while (in >> token) {
        std::stringstream parts(token);
        std::string piece;
        while (std::getline(parts, piece, ',')) {
            if (piece.empty()) continue;
            try {
                std::size_t used = 0;
                values.push_back(std::stod(piece, &used));
                if (used != piece.size()) throw std::invalid_argument(piece);
            } catch (const std::exception&) {
                throw ArgumentError("non-numeric value '" + piece + "' in " + file.string());
            }
        }
    }
    return values;
}

bool is_integer(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

bool label_less(const std::string& a, const std::string& b) {
    if (is_integer(a) && is_integer(b)) return std::stoll(a) < std::stoll(b);
    return a < b;
}

}  // namespace

std::vector<std::size_t> class_counts(const Labels& labels, int num_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int y : labels)
        if (y >= 0 && y < num_classes) ++counts[static_cast<std::size_t>(y)];
    return counts;
}

DomainPair make_two_moons_shift(int n_per_domain, double rotation_degrees, double noise, std::uint64_t seed) {
    if (n_per_domain < 4) throw ArgumentError("two-moons needs at least 2 samples per class");
    auto source_rng = domain_rng(seed, 0);
    auto target_rng = domain_rng(seed, 1);
    DomainPair pair;
    pair.num_classes = 2;
    pair.class_names = {"0", "1"};
    pair.source = sample_moons(n_per_domain, noise, source_rng);
    LabeledDataset target = sample_moons(n_per_domain, noise, target_rng);
    const double a = rotation_degrees * std::numbers::pi / 180.0;
    Eigen::Matrix2d rot;
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    pair.target.inputs = target.inputs * rot.transpose();
    pair.target_eval_labels = std::move(target.labels);
    return pair;
}

DomainPair make_gaussian_shift(const GaussianShiftSpec& spec, std::uint64_t seed) {
    if (spec.num_classes < 2) throw ArgumentError("gaussian shift needs K >= 2");
    const int dim = spec.shift.empty() ? spec.num_classes : static_cast<int>(spec.shift.size());
    if (dim < spec.num_classes)
        throw ArgumentError("shift vector length must be at least the class count");
    if (spec.n_per_domain < spec.num_classes) throw ArgumentError("fewer samples than classes");
    Vector shift = Vector::Zero(dim);
    for (std::size_t i = 0; i < spec.shift.size(); ++i) shift[static_cast<Eigen::Index>(i)] = spec.shift[i];

    auto draw = [&](std::mt19937_64& rng, bool shifted) {
        std::normal_distribution<double> unit(0.0, 1.0);
        LabeledDataset out{Matrix(spec.n_per_domain, dim), Labels(static_cast<std::size_t>(spec.n_per_domain))};
        const auto counts = balanced_counts(spec.n_per_domain, spec.num_classes);
        Eigen::Index row = 0;
        for (int c = 0; c < spec.num_classes; ++c) {
            for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
                for (int j = 0; j < dim; ++j) out.inputs(row, j) = spec.sigma * unit(rng);
                out.inputs(row, c) += spec.separation;
                if (shifted) out.inputs.row(row) += shift.transpose();
                out.labels[static_cast<std::size_t>(row)] = c;
            }
        }
        return out;
    };

    auto source_rng = domain_rng(seed, 0);
    auto target_rng = domain_rng(seed, 1);
    DomainPair pair;
    pair.num_classes = spec.num_classes;
    for (int c = 0; c < spec.num_classes; ++c) pair.class_names.push_back(std::to_string(c));
    pair.source = draw(source_rng, false);
    LabeledDataset target = draw(target_rng, true);
    pair.target.inputs = std::move(target.inputs);
    pair.target_eval_labels = std::move(target.labels);
    return pair;
}

std::size_t minority_size(std::size_t majority_count, double fraction) {
    return std::max<std::size_t>(1, round_half_up(fraction * static_cast<double>(majority_count)));
}

std::vector<double> imbalance_fractions() {
    std::vector<double> out;
    for (int pct = 10; pct >= 1; --pct) out.push_back(pct / 100.0);
    return out;
}

DomainPair make_imbalanced(const DomainPair& pair, const ImbalanceSpec& spec, std::uint64_t seed) {
    if (!pair.target_eval_labels) throw ArgumentError("imbalancing needs target class labels");
    const int k = pair.num_classes;
    if (spec.majority_class < 0 || spec.majority_class >= k) throw ArgumentError("majority class out of range");
    if (spec.minority_fraction <= 0.0 || spec.minority_fraction > 1.0)
        throw ArgumentError("minority fraction must lie in (0, 1]");
    if (spec.source_downsample < 0.0 || spec.source_downsample >= 1.0)
        throw ArgumentError("source downsample rate must lie in [0, 1)");
    const Labels& target_labels = *pair.target_eval_labels;

    std::vector<std::vector<std::size_t>> target_by_class(static_cast<std::size_t>(k));
    std::vector<std::vector<std::size_t>> source_by_class(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < target_labels.size(); ++i) target_by_class[static_cast<std::size_t>(target_labels[i])].push_back(i);
    for (std::size_t i = 0; i < pair.source.labels.size(); ++i) source_by_class[static_cast<std::size_t>(pair.source.labels[i])].push_back(i);

    const std::size_t majority = target_by_class[static_cast<std::size_t>(spec.majority_class)].size();
    if (majority == 0) throw ArgumentError("majority class " + std::to_string(spec.majority_class) + " is absent from the target");
    const std::size_t minority = minority_size(majority, spec.minority_fraction);

    auto rng = domain_rng(seed, 2);
    std::vector<std::size_t> keep_target, keep_source;
    for (int c = 0; c < k; ++c) {
        const auto& pool = target_by_class[static_cast<std::size_t>(c)];
        if (pool.empty()) throw ArgumentError("target class " + std::to_string(c) + " is empty");
        const auto chosen = c == spec.majority_class ? pool : sorted_subset(pool, minority, rng);
        keep_target.insert(keep_target.end(), chosen.begin(), chosen.end());
    }
    for (int c = 0; c < k; ++c) {
        const auto& pool = source_by_class[static_cast<std::size_t>(c)];
        if (pool.empty()) throw ArgumentError("source class " + std::to_string(c) + " is empty");
        const std::size_t keep = std::max<std::size_t>(
            1, round_half_up((1.0 - spec.source_downsample) * static_cast<double>(pool.size())));
        const auto chosen = sorted_subset(pool, keep, rng);
        keep_source.insert(keep_source.end(), chosen.begin(), chosen.end());
    }
    std::sort(keep_target.begin(), keep_target.end());
    std::sort(keep_source.begin(), keep_source.end());

    DomainPair out;
    out.num_classes = k;
    out.class_names = pair.class_names;
    out.source.inputs = gather_rows(pair.source.inputs, keep_source);
    out.source.labels = gather(pair.source.labels, keep_source);
    out.target.inputs = gather_rows(pair.target.inputs, keep_target);
    out.target_eval_labels = gather(target_labels, keep_target);
    return out;
}

DomainPair load_directory_dataset(const std::filesystem::path& root, const std::string& manifest) {
    const auto manifest_path = root / manifest;
    std::ifstream in(manifest_path);
    if (!in) throw ArgumentError("missing manifest: " + manifest_path.string());
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"path", "domain", "label"})
        throw ArgumentError("manifest header must be `path,domain,label`");

    struct Row {
        std::vector<double> features;
        bool source;
        std::string label;
    };
    std::vector<Row> rows;
    std::size_t width = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 3)
            throw ArgumentError("manifest line " + std::to_string(line_no) + ": expected 3 columns");
        Row row;
        if (cells[1] == "source")
            row.source = true;
        else if (cells[1] == "target")
            row.source = false;
        else
            throw ArgumentError("manifest line " + std::to_string(line_no) + ": unknown domain '" + cells[1] + "'");
        if (row.source && cells[2].empty())
            throw ArgumentError("manifest line " + std::to_string(line_no) + ": source rows need a label");
        row.label = cells[2];
        std::filesystem::path file(cells[0]);
        if (file.is_relative()) file = root / file;
        row.features = read_feature_file(file);
        if (row.features.empty()) throw ArgumentError("empty feature file: " + file.string());
        if (width == 0) width = row.features.size();
        if (row.features.size() != width)
            throw ArgumentError("inconsistent feature width in " + file.string() + ": " +
                                std::to_string(row.features.size()) + " vs " + std::to_string(width));
        rows.push_back(std::move(row));
    }

    std::set<std::string, decltype(&label_less)> vocab(&label_less);
    for (const auto& r : rows)
        if (r.source) vocab.insert(r.label);
    if (vocab.empty()) throw ArgumentError("manifest has no source rows");
    std::map<std::string, int> index;
    DomainPair pair;
    for (const auto& name : vocab) {
        index[name] = static_cast<int>(pair.class_names.size());
        pair.class_names.push_back(name);
    }
    pair.num_classes = static_cast<int>(pair.class_names.size());

    std::vector<const Row*> source_rows, target_rows;
    for (const auto& r : rows) (r.source ? source_rows : target_rows).push_back(&r);
    if (target_rows.empty()) throw ArgumentError("manifest has no target rows");

    const auto d = static_cast<Eigen::Index>(width);
    pair.source.inputs.resize(static_cast<Eigen::Index>(source_rows.size()), d);
    for (std::size_t i = 0; i < source_rows.size(); ++i) {
        pair.source.inputs.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const RowVector>(source_rows[i]->features.data(), d);
        pair.source.labels.push_back(index.at(source_rows[i]->label));
    }
    pair.target.inputs.resize(static_cast<Eigen::Index>(target_rows.size()), d);
    Labels hidden;
    std::size_t labeled = 0;
    for (std::size_t i = 0; i < target_rows.size(); ++i) {
        pair.target.inputs.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const RowVector>(target_rows[i]->features.data(), d);
        const auto& label = target_rows[i]->label;
        if (label.empty()) {
            hidden.push_back(-1);
            continue;
        }
        auto it = index.find(label);
        if (it == index.end())
            throw ArgumentError("target label '" + label + "' does not occur in the source domain");
        hidden.push_back(it->second);
        ++labeled;
    }
    if (labeled == target_rows.size())
        pair.target_eval_labels = std::move(hidden);
    else if (labeled > 0)
        spdlog::warn("only {} of {} target rows are labeled; evaluation labels dropped", labeled, target_rows.size());
    return pair;
}

void export_directory_dataset(const DomainPair& pair, const std::filesystem::path& root) {
    std::filesystem::create_directories(root / "features");
    std::ofstream manifest(root / "manifest.csv");
    manifest << "path,domain,label\n";
    auto write_rows = [&](const Matrix& inputs, const char* domain, const Labels* labels) {
        for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
            const std::string rel = std::string("features/") + domain + "_" + std::to_string(i) + ".txt";
            std::ofstream f(root / rel);
            f.precision(17);
            for (Eigen::Index j = 0; j < inputs.cols(); ++j) f << (j ? " " : "") << inputs(i, j);
            f << '\n';
            manifest << rel << ',' << domain << ',';
            if (labels) {
                const int y = (*labels)[static_cast<std::size_t>(i)];
                if (y >= 0) manifest << pair.class_names[static_cast<std::size_t>(y)];
            }
            manifest << '\n';
        }
    };
    write_rows(pair.source.inputs, "source", &pair.source.labels);
    write_rows(pair.target.inputs, "target", pair.target_eval_labels ? &*pair.target_eval_labels : nullptr);
}

}  // namespace avatar
