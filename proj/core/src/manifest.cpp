#include "slrkit/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "slrkit/errors.hpp"

namespace slrkit {

using nlohmann::json;

std::string tool_version() { return "slrkit 0.1.0"; }

std::string iso_timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  json j{{"run_id", m.run_id},
         {"created_at", m.created_at},
         {"updated_at", m.updated_at},
         {"tool_version", m.tool_version},
         {"config", m.config},
         {"artifacts", m.artifacts}};
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  os << j.dump(2) << '\n';
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.updated_at = j.value("updated_at", m.created_at);
  m.tool_version = j.value("tool_version", std::string());
  m.config = j.value("config", json::object());
  m.artifacts = j.value("artifacts", std::map<std::string, std::string>());
  return m;
}

std::vector<std::string> missing_artifacts(const RunManifest& m,
                                           const std::filesystem::path& run_dir) {
  std::vector<std::string> missing;
  for (const auto& [name, rel] : m.artifacts) {
    if (!std::filesystem::exists(run_dir / rel)) missing.push_back(name);
  }
  return missing;
}

}  // namespace slrkit
