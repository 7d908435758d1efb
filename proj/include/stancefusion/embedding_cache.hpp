#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "stancefusion/error.hpp"
#include "stancefusion/hashing.hpp"

namespace stancefusion {

// On-disk embedding cache, content-addressed by
// "<backend name>:<fnv1a64 of rendered input>". Binary layout, version 1:
//
//   header: 8-byte magic "SFEMBC1\n"
//   record: u32 key length | key bytes | u32 dim | dim x float32 | u64 checksum
//
// all integers little-endian; the checksum is fnv1a64 over the key and the
// raw float bytes. Values are stored as float32, so cached vectors are
// float32-quantized; a record whose checksum does not match is skipped with
// a warning and its value recomputed on demand. Writes are serialized by an
// in-process mutex (single writer, any number of readers).
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) { load(); }

  static std::string make_key(const std::string& backend_name, const std::string& rendered) {
    return backend_name + ":" + to_hex(fnv1a64(rendered));
  }

  bool contains(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return values_.count(key) > 0;
  }

  /// Returns the cached vector, widened from float32.
  bool lookup(const std::string& key, Eigen::VectorXd* out) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = values_.find(key);
    if (it == values_.end()) return false;
    out->resize(static_cast<Eigen::Index>(it->second.size()));
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      (*out)[static_cast<Eigen::Index>(i)] = static_cast<double>(it->second[i]);
    }
    return true;
  }

  /// Stores a vector (quantized to float32) and returns the value a later
  /// lookup will see, so cold and warm paths yield identical vectors.
  Eigen::VectorXd store(const std::string& key, const Eigen::VectorXd& values) {
    std::vector<float> quantized(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      quantized[static_cast<std::size_t>(i)] = static_cast<float>(values[i]);
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (values_.emplace(key, quantized).second) append_record(key, quantized);
    }
    Eigen::VectorXd out(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      out[i] = static_cast<double>(quantized[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return values_.size();
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  static constexpr char kMagic[9] = "SFEMBC1\n";

  void load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // fresh cache
    char magic[8];
    if (!in.read(magic, 8) || std::string_view(magic, 8) != std::string_view(kMagic, 8)) {
      std::cerr << "warning: " << path_ << " is not an embedding cache; ignoring it\n";
      return;
    }
    while (true) {
      std::uint32_t key_len = 0;
      if (!in.read(reinterpret_cast<char*>(&key_len), sizeof(key_len))) break;
      std::string key(key_len, '\0');
      std::uint32_t dim = 0;
      if (!in.read(key.data(), key_len) || !in.read(reinterpret_cast<char*>(&dim), sizeof(dim))) {
        std::cerr << "warning: truncated record in " << path_ << "; ignoring the rest\n";
        break;
      }
      std::vector<float> values(dim);
      std::uint64_t checksum = 0;
      if (!in.read(reinterpret_cast<char*>(values.data()), dim * sizeof(float)) ||
          !in.read(reinterpret_cast<char*>(&checksum), sizeof(checksum))) {
        std::cerr << "warning: truncated record in " << path_ << "; ignoring the rest\n";
        break;
      }
      if (checksum != record_checksum(key, values)) {
        std::cerr << "warning: checksum mismatch for cache key " << key << " in " << path_
                  << "; record dropped, value will be recomputed\n";
        continue;
      }
      values_.emplace(std::move(key), std::move(values));
    }
  }

  static std::uint64_t record_checksum(const std::string& key, const std::vector<float>& values) {
    std::string bytes = key;
    bytes.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
    return fnv1a64(bytes);
  }

  void append_record(const std::string& key, const std::vector<float>& values) {
    const bool fresh = !std::filesystem::exists(path_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot open embedding cache " + path_.string() + " for writing");
    if (fresh) out.write(kMagic, 8);
    const auto key_len = static_cast<std::uint32_t>(key.size());
    const auto dim = static_cast<std::uint32_t>(values.size());
    const std::uint64_t checksum = record_checksum(key, values);
    out.write(reinterpret_cast<const char*>(&key_len), sizeof(key_len));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw IoError("failed writing embedding cache " + path_.string());
  }

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::vector<float>> values_;
};

}  // namespace stancefusion
