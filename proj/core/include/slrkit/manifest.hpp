#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace slrkit {

// Persisted record of a run: configuration, seeds, and artifact locations.
// A manifest plus the dataset reproduces the run's configuration exactly.
// Artifact paths are relative to the run directory the manifest lives in.
struct RunManifest {
  std::string run_id;
  std::string created_at;  // UTC, ISO 8601
  std::string updated_at;
  std::string tool_version;
  nlohmann::json config = nlohmann::json::object();  // per-stage settings + seeds
  std::map<std::string, std::string> artifacts;
};

std::string tool_version();
std::string iso_timestamp_utc();

void save_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest load_manifest(const std::filesystem::path& path);

// Names of artifacts whose files do not exist under run_dir.
std::vector<std::string> missing_artifacts(const RunManifest& m,
                                           const std::filesystem::path& run_dir);

}  // namespace slrkit
