#include "avatar/checkpoint.hpp"

#include <fstream>

namespace avatar {

namespace {

constexpr const char* kFormat = "avatar-checkpoint/1";

void append_params(nlohmann::json& out, const std::string& prefix, const Mlp& net) {
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& layer = net.layers()[l];
        const std::string base = prefix + "." + std::to_string(l);
        out.push_back({{"name", base + ".weight"},
                       {"shape", {layer.weight.rows(), layer.weight.cols()}},
                       {"values", std::vector<double>(layer.weight.data(), layer.weight.data() + layer.weight.size())}});
        out.push_back({{"name", base + ".bias"},
                       {"shape", {layer.bias.size()}},
                       {"values", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
    }
}

void restore_params(const nlohmann::json& params, const std::string& prefix, Mlp& net) {
    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& p : params) by_name[p.at("name").get<std::string>()] = &p;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& layer = net.layers()[l];
        const std::string base = prefix + "." + std::to_string(l);
        auto fetch = [&](const std::string& name, Eigen::Index expected) {
            const auto it = by_name.find(name);
            if (it == by_name.end()) throw ArgumentError("checkpoint is missing parameter " + name);
            auto values = it->second->at("values").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(values.size()) != expected)
                throw ArgumentError("checkpoint parameter " + name + " has the wrong size");
            return values;
        };
        const auto w = fetch(base + ".weight", layer.weight.size());
        std::copy(w.begin(), w.end(), layer.weight.data());
        const auto b = fetch(base + ".bias", layer.bias.size());
        std::copy(b.begin(), b.end(), layer.bias.data());
    }
}

}  // namespace

nlohmann::json checkpoint_json(const ModelPair& model, const nlohmann::json& meta) {
    const auto& fs = model.extractor.spec();
    const auto& gs = model.classifier.spec();
    nlohmann::json params = nlohmann::json::array();
    append_params(params, "f", model.extractor.net());
    append_params(params, "g", model.classifier.net());
    return {
        {"format", kFormat},
        {"extractor",
         {{"input_dim", fs.input_dim},
          {"hidden", fs.hidden},
          {"embedding_dim", fs.embedding_dim},
          {"activation", to_string(fs.activation)}}},
        {"classifier",
         {{"num_classes", gs.num_classes}, {"hidden", gs.hidden}, {"activation", to_string(gs.activation)}}},
        {"meta", meta},
        {"parameters", params},
    };
}

ModelPair model_from_checkpoint_json(const nlohmann::json& j) {
    if (j.value("format", "") != kFormat) throw ArgumentError("not an avatar checkpoint");
    FeatureExtractorSpec fs;
    const auto& f = j.at("extractor");
    fs.input_dim = f.at("input_dim").get<int>();
    fs.hidden = f.at("hidden").get<std::vector<int>>();
    fs.embedding_dim = f.at("embedding_dim").get<int>();
    fs.activation = parse_activation(f.at("activation").get<std::string>());
    ClassifierSpec gs;
    const auto& g = j.at("classifier");
    gs.num_classes = g.at("num_classes").get<int>();
    gs.hidden = g.at("hidden").get<std::vector<int>>();
    gs.activation = parse_activation(g.at("activation").get<std::string>());
    ModelPair model{FeatureExtractor(fs), JointDiscriminatorClassifier(fs.embedding_dim, gs)};
    restore_params(j.at("parameters"), "f", model.extractor.net());
    restore_params(j.at("parameters"), "g", model.classifier.net());
    return model;
}

void save_checkpoint(const std::filesystem::path& file, const ModelPair& model, const nlohmann::json& meta) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw Error("cannot write checkpoint " + file.string());
    out << checkpoint_json(model, meta).dump() << '\n';
}

ModelPair load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ArgumentError("cannot read checkpoint " + file.string());
    return model_from_checkpoint_json(nlohmann::json::parse(in));
}

}  // namespace avatar
