#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stancefusion/error.hpp"
#include "stancefusion/hashing.hpp"

namespace stancefusion {

inline constexpr std::string_view kCodeVersion = "0.1.0";

inline std::string checksum_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for checksumming");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return to_hex(fnv1a64(buffer.str()));
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// manifest.json bookkeeping for an artifact directory: the config
/// snapshot, code version, per-file checksums and the seed chosen by the
/// selection protocol. Commands update it incrementally; timestamps live
/// only here so the model artifacts themselves stay bit-reproducible.
class ArtifactDir {
 public:
  explicit ArtifactDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create artifact directory " + dir_.string() + ": " + ec.message());
    load_manifest();
  }

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  bool has(const std::string& name) const { return std::filesystem::exists(path(name)); }

  /// Registers a freshly written artifact in the manifest.
  void record(const std::string& name) {
    manifest_["artifacts"][name] = checksum_file(path(name));
  }

  void set_config_snapshot(nlohmann::ordered_json snapshot) {
    manifest_["config"] = std::move(snapshot);
  }

  void set_chosen_seed(std::uint64_t seed) { manifest_["chosen_seed"] = seed; }

  std::optional<std::uint64_t> chosen_seed() const {
    if (manifest_.contains("chosen_seed") && !manifest_["chosen_seed"].is_null()) {
      return manifest_["chosen_seed"].get<std::uint64_t>();
    }
    return std::nullopt;
  }

  void write_manifest() {
    manifest_["kind"] = "stancefusion.manifest";
    manifest_["format_version"] = 1;
    manifest_["code_version"] = std::string(kCodeVersion);
    if (!manifest_.contains("created")) manifest_["created"] = utc_timestamp();
    manifest_["updated"] = utc_timestamp();
    std::ofstream out(path("manifest.json"));
    if (!out) throw IoError("cannot write manifest in " + dir_.string());
    out << manifest_.dump(2) << '\n';
    if (!out) throw IoError("failed writing manifest in " + dir_.string());
  }

  const nlohmann::ordered_json& manifest() const { return manifest_; }

 private:
  void load_manifest() {
    const auto p = path("manifest.json");
    if (!std::filesystem::exists(p)) {
      manifest_ = nlohmann::ordered_json::object();
      manifest_["artifacts"] = nlohmann::ordered_json::object();
      return;
    }
    std::ifstream in(p);
    try {
      manifest_ = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(p.string() + ": " + e.what());
    }
    if (!manifest_.contains("artifacts")) manifest_["artifacts"] = nlohmann::ordered_json::object();
  }

  std::filesystem::path dir_;
  nlohmann::ordered_json manifest_;
};

}  // namespace stancefusion
