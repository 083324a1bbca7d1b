#include "avatar/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace avatar {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
    throw ConfigError("invalid value '" + value + "' for " + key + " (expected " + expected + ")");
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    bad_value(key, v, "an integer");
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    bad_value(key, v, "a number");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "true or false");
}

std::vector<std::string> to_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& s : to_list(v)) out.push_back(static_cast<int>(to_int(key, s)));
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : to_list(v)) out.push_back(to_double(key, s));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
    return os.str();
}

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

ImbalanceSpec& imbalance(ExperimentSuite& s) {
    if (!s.base.dataset.imbalance) s.base.dataset.imbalance = ImbalanceSpec{};
    return *s.base.dataset.imbalance;
}

DatasetKind parse_dataset_kind(const std::string& v) {
    if (v == "two_moons") return DatasetKind::two_moons;
    if (v == "gaussian") return DatasetKind::gaussian;
    if (v == "directory") return DatasetKind::directory;
    throw ConfigError("unknown dataset '" + v + "' (expected two_moons, gaussian, directory)");
}

std::string to_string(DatasetKind k) {
    switch (k) {
    case DatasetKind::two_moons: return "two_moons";
    case DatasetKind::gaussian: return "gaussian";
    case DatasetKind::directory: return "directory";
    }
    return "two_moons";
}

using Handler = std::function<void(ExperimentSuite&, const std::string& key, const std::string& value)>;

const std::map<std::string, Handler>& handlers() {
    static const std::map<std::string, Handler> table = {
        {"name", [](auto& s, auto&, auto& v) { s.name = v; }},
        {"variant", [](auto& s, auto&, auto& v) { s.variants = {parse_variant(v)}; s.base.variant = s.variants[0]; }},
        {"variants", [](auto& s, auto& k, auto& v) {
             s.variants.clear();
             for (const auto& name : to_list(v)) s.variants.push_back(parse_variant(name));
             if (s.variants.empty()) bad_value(k, v, "a list of variants");
             s.base.variant = s.variants[0];
         }},
        {"seed", [](auto& s, auto& k, auto& v) { s.seeds = {static_cast<std::uint64_t>(to_int(k, v))}; s.base.seed = s.seeds[0]; }},
        {"seeds", [](auto& s, auto& k, auto& v) {
             s.seeds.clear();
             for (int x : to_int_list(k, v)) s.seeds.push_back(static_cast<std::uint64_t>(x));
             if (s.seeds.empty()) bad_value(k, v, "a list of seeds");
             s.base.seed = s.seeds[0];
         }},
        {"epochs", [](auto& s, auto& k, auto& v) { s.base.epochs = static_cast<int>(to_int(k, v)); }},
        {"warmup_epochs", [](auto& s, auto& k, auto& v) { s.base.warmup_epochs = static_cast<int>(to_int(k, v)); }},
        {"batch_size", [](auto& s, auto& k, auto& v) { s.base.batch_size = static_cast<int>(to_int(k, v)); }},
        {"pretrain_epochs", [](auto& s, auto& k, auto& v) { s.base.pretrain_epochs = static_cast<int>(to_int(k, v)); }},
        {"learning_rate", [](auto& s, auto& k, auto& v) { s.base.learning_rate = to_double(k, v); }},
        {"task_lr_multiplier", [](auto& s, auto& k, auto& v) { s.base.task_lr_multiplier = to_double(k, v); }},
        {"momentum", [](auto& s, auto& k, auto& v) { s.base.momentum = to_double(k, v); }},
        {"weight_decay", [](auto& s, auto& k, auto& v) { s.base.weight_decay = to_double(k, v); }},
        {"kernel", [](auto& s, auto&, auto& v) { s.base.kmeans.kernel.kind = parse_kernel(v); }},
        {"rbf_gamma", [](auto& s, auto& k, auto& v) { s.base.kmeans.kernel.rbf_gamma = to_double(k, v); }},
        {"kmeans_max_iterations", [](auto& s, auto& k, auto& v) { s.base.kmeans.max_iterations = static_cast<int>(to_int(k, v)); }},
        {"auxiliary_form", [](auto& s, auto&, auto& v) { s.base.auxiliary_form = parse_auxiliary_form(v); }},
        {"auxiliary_scope", [](auto& s, auto& k, auto& v) {
             if (v == "batch") s.base.auxiliary_scope = AuxiliaryScope::batch;
             else if (v == "dataset") s.base.auxiliary_scope = AuxiliaryScope::dataset;
             else bad_value(k, v, "batch or dataset");
         }},
        {"checkpoint_every", [](auto& s, auto& k, auto& v) { s.base.checkpoint_every = static_cast<int>(to_int(k, v)); }},
        {"early_stopping_patience", [](auto& s, auto& k, auto& v) { s.base.early_stopping_patience = static_cast<int>(to_int(k, v)); }},
        {"export_cluster_state", [](auto& s, auto& k, auto& v) { s.base.export_cluster_state = to_bool(k, v); }},
        {"export_embeddings", [](auto& s, auto& k, auto& v) { s.base.export_embeddings = to_bool(k, v); }},
        {"output_dir", [](auto& s, auto&, auto& v) { s.base.output_dir = v; }},
        {"model.hidden", [](auto& s, auto& k, auto& v) { s.base.extractor.hidden = to_int_list(k, v); }},
        {"model.embedding_dim", [](auto& s, auto& k, auto& v) { s.base.extractor.embedding_dim = static_cast<int>(to_int(k, v)); }},
        {"model.activation", [](auto& s, auto&, auto& v) {
             s.base.extractor.activation = parse_activation(v);
             s.base.classifier.activation = s.base.extractor.activation;
         }},
        {"model.classifier_hidden", [](auto& s, auto& k, auto& v) { s.base.classifier.hidden = to_int_list(k, v); }},
        {"dataset", [](auto& s, auto&, auto& v) { s.base.dataset.kind = parse_dataset_kind(v); }},
        {"dataset.seed", [](auto& s, auto& k, auto& v) { s.base.dataset.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
        {"dataset.n", [](auto& s, auto& k, auto& v) { s.base.dataset.n = static_cast<int>(to_int(k, v)); }},
        {"dataset.rotation", [](auto& s, auto& k, auto& v) { s.base.dataset.rotation = to_double(k, v); }},
        {"dataset.noise", [](auto& s, auto& k, auto& v) { s.base.dataset.noise = to_double(k, v); }},
        {"dataset.classes", [](auto& s, auto& k, auto& v) { s.base.dataset.gaussian.num_classes = static_cast<int>(to_int(k, v)); }},
        {"dataset.shift", [](auto& s, auto& k, auto& v) { s.base.dataset.gaussian.shift = to_double_list(k, v); }},
        {"dataset.sigma", [](auto& s, auto& k, auto& v) { s.base.dataset.gaussian.sigma = to_double(k, v); }},
        {"dataset.separation", [](auto& s, auto& k, auto& v) { s.base.dataset.gaussian.separation = to_double(k, v); }},
        {"dataset.path", [](auto& s, auto&, auto& v) { s.base.dataset.path = v; }},
        {"dataset.manifest", [](auto& s, auto&, auto& v) { s.base.dataset.manifest = v; }},
        {"imbalance.majority_class", [](auto& s, auto& k, auto& v) { imbalance(s).majority_class = static_cast<int>(to_int(k, v)); }},
        {"imbalance.fraction", [](auto& s, auto& k, auto& v) { imbalance(s).minority_fraction = to_double(k, v); }},
        {"imbalance.source_downsample", [](auto& s, auto& k, auto& v) { imbalance(s).source_downsample = to_double(k, v); }},
        {"imbalance.fractions", [](auto& s, auto& k, auto& v) {
             imbalance(s);
             s.imbalance_fractions = v == "standard" ? imbalance_fractions() : to_double_list(k, v);
             if (!s.imbalance_fractions.empty()) imbalance(s).minority_fraction = s.imbalance_fractions.front();
         }},
    };
    return table;
}

}  // namespace

void RunConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be nonnegative");
    if (warmup_epochs >= epochs)
        throw ConfigError("warmup_epochs (" + std::to_string(warmup_epochs) + ") must be less than epochs (" +
                          std::to_string(epochs) + ")");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be nonnegative");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(task_lr_multiplier > 0.0)) throw ConfigError("task_lr_multiplier must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
    if (kmeans.max_iterations < 1) throw ConfigError("kmeans_max_iterations must be positive");
    if (!(kmeans.kernel.rbf_gamma > 0.0)) throw ConfigError("rbf_gamma must be positive");
    if (extractor.embedding_dim < 1) throw ConfigError("model.embedding_dim must be positive");
    for (int w : extractor.hidden)
        if (w < 1) throw ConfigError("model.hidden widths must be positive");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
    if (early_stopping_patience < 0) throw ConfigError("early_stopping_patience must be nonnegative");
    if (dataset.kind == DatasetKind::directory && dataset.path.empty())
        throw ConfigError("dataset.path is required for directory datasets");
}

Settings parse_settings(const std::string& text, const std::string& origin) {
    Settings out;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected `key = value`");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

Settings read_settings_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_settings(buf.str(), file.string());
}

std::vector<std::string> known_config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : handlers()) keys.push_back(k);
    return keys;
}

ExperimentSuite build_suite(const Settings& settings) {
    ExperimentSuite suite;
    for (const auto& [key, value] : settings) {
        const auto it = handlers().find(key);
        if (it == handlers().end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(suite, key, value);
    }
    suite.base.validate();
    return suite;
}

ExperimentSuite parse_config(const std::filesystem::path& file, const Settings& overrides) {
    Settings all = read_settings_file(file);
    if (const char* env = std::getenv("AVATAR_OUTPUT_DIR"); env && *env) all.emplace_back("output_dir", env);
    all.insert(all.end(), overrides.begin(), overrides.end());
    return build_suite(all);
}

DomainPair make_dataset(const DatasetSpec& spec) {
    DomainPair pair;
    switch (spec.kind) {
    case DatasetKind::two_moons:
        pair = make_two_moons_shift(spec.n, spec.rotation, spec.noise, spec.seed);
        break;
    case DatasetKind::gaussian: {
        GaussianShiftSpec g = spec.gaussian;
        g.n_per_domain = spec.n;
        pair = make_gaussian_shift(g, spec.seed);
        break;
    }
    case DatasetKind::directory:
        pair = load_directory_dataset(spec.path, spec.manifest);
        break;
    }
    if (spec.imbalance) pair = make_imbalanced(pair, *spec.imbalance, spec.seed);
    return pair;
}

std::string describe(const RunConfig& c) {
    std::ostringstream os;
    os << "variant = " << to_string(c.variant) << '\n'
       << "seed = " << c.seed << '\n'
       << "epochs = " << c.epochs << '\n'
       << "warmup_epochs = " << c.warmup_epochs << '\n'
       << "batch_size = " << c.batch_size << '\n'
       << "pretrain_epochs = " << c.pretrain_epochs << '\n'
       << "learning_rate = " << fmt_double(c.learning_rate) << '\n'
       << "task_lr_multiplier = " << fmt_double(c.task_lr_multiplier) << '\n'
       << "momentum = " << fmt_double(c.momentum) << '\n'
       << "weight_decay = " << fmt_double(c.weight_decay) << '\n'
       << "kernel = " << to_string(c.kmeans.kernel.kind) << '\n'
       << "rbf_gamma = " << fmt_double(c.kmeans.kernel.rbf_gamma) << '\n'
       << "kmeans_max_iterations = " << c.kmeans.max_iterations << '\n'
       << "auxiliary_form = " << to_string(c.auxiliary_form) << '\n'
       << "auxiliary_scope = " << (c.auxiliary_scope == AuxiliaryScope::batch ? "batch" : "dataset") << '\n'
       << "checkpoint_every = " << c.checkpoint_every << '\n'
       << "early_stopping_patience = " << c.early_stopping_patience << '\n'
       << "export_cluster_state = " << (c.export_cluster_state ? "true" : "false") << '\n'
       << "export_embeddings = " << (c.export_embeddings ? "true" : "false") << '\n'
       << "output_dir = " << c.output_dir.string() << '\n'
       << "model.hidden = " << join(c.extractor.hidden) << '\n'
       << "model.embedding_dim = " << c.extractor.embedding_dim << '\n'
       << "model.activation = " << to_string(c.extractor.activation) << '\n'
       << "model.classifier_hidden = " << join(c.classifier.hidden) << '\n'
       << "dataset = " << to_string(c.dataset.kind) << '\n'
       << "dataset.seed = " << c.dataset.seed << '\n'
       << "dataset.n = " << c.dataset.n << '\n'
       << "dataset.rotation = " << fmt_double(c.dataset.rotation) << '\n'
       << "dataset.noise = " << fmt_double(c.dataset.noise) << '\n'
       << "dataset.classes = " << c.dataset.gaussian.num_classes << '\n'
       << "dataset.shift = " << join(c.dataset.gaussian.shift) << '\n'
       << "dataset.sigma = " << fmt_double(c.dataset.gaussian.sigma) << '\n'
       << "dataset.separation = " << fmt_double(c.dataset.gaussian.separation) << '\n';
    if (!c.dataset.path.empty()) os << "dataset.path = " << c.dataset.path.string() << '\n';
    os << "dataset.manifest = " << c.dataset.manifest << '\n';
    if (c.dataset.imbalance) {
        os << "imbalance.majority_class = " << c.dataset.imbalance->majority_class << '\n'
           << "imbalance.fraction = " << fmt_double(c.dataset.imbalance->minority_fraction) << '\n'
           << "imbalance.source_downsample = " << fmt_double(c.dataset.imbalance->source_downsample) << '\n';
    }
    return os.str();
}

}  // namespace avatar
