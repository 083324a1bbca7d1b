#pragma once

#include <filesystem>

#include <json.hpp>

#include "avatar/models.hpp"

namespace avatar {

/// Flat named parameter arrays (f.<layer>.weight, g.<layer>.bias, ...) with shapes, plus the
/// architecture needed to rebuild the networks.
nlohmann::json checkpoint_json(const ModelPair& model, const nlohmann::json& meta = nlohmann::json::object());
ModelPair model_from_checkpoint_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& file, const ModelPair& model,
                     const nlohmann::json& meta = nlohmann::json::object());
ModelPair load_checkpoint(const std::filesystem::path& file);

}  // namespace avatar
