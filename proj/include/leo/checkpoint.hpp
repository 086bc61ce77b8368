#pragma once

#include <filesystem>

#include <json.hpp>

#include "leo/autograd.hpp"

namespace leo {

/// Checkpoint layout: manifest.json plus one raw little-endian float32 blob
/// per named parameter tensor; shapes live in the manifest.
void save_params(const std::filesystem::path& dir, const ParamStore& ps,
                 const nlohmann::json& extra);

/// Fills an already-constructed store by name, validating shapes.
nlohmann::json load_params(const std::filesystem::path& dir, ParamStore& ps);

/// Manifest only (to inspect dims before building the model).
nlohmann::json load_manifest(const std::filesystem::path& dir);

/// FNV-1a over a canonical JSON dump; used for run directories and for
/// recording which config produced a checkpoint.
std::string config_hash(const nlohmann::json& j);

}  // namespace leo
