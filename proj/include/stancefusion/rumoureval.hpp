#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "stancefusion/corpus.hpp"
#include "stancefusion/error.hpp"

namespace stancefusion {

// Loader for the RumourEval 2019 on-disk layout. The expected structure is
//
//   <root>/<split>-key.json              label key file, {"subtaskaenglish": {id: label}}
//   <root>/**/<thread>/source-tweet/<id>.json
//   <root>/**/<thread>/replies/<id>.json
//   <root>/**/<thread>/structure.json    nested reply tree, rooted at the source id
//
// Any directory containing a source-tweet/ subdirectory is treated as a
// thread directory, which covers both the twitter-english/<event>/ and the
// reddit-*-data/ trees of the official release. Tweet files carry a "text"
// key; reddit files carry a "data" object (title for submissions, body for
// comments). Deleted or empty reddit bodies are kept as empty text.
//
// In labeled splits, replies missing from the key file are dropped along
// with their descendants; a source post missing from the key file is an
// error, since dropping it would silently discard the whole thread.

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedPostFile(path.string() + ": " + e.what());
  }
}

struct RawPost {
  std::string id;
  std::string text;
  Platform platform = Platform::twitter;
};

inline RawPost parse_post_file(const std::filesystem::path& path) {
  nlohmann::json j = read_json_file(path);
  if (!j.is_object()) throw MalformedPostFile(path.string() + ": not a JSON object");
  RawPost post;
  if (j.contains("text")) {
    post.platform = Platform::twitter;
    if (!j["text"].is_string()) throw MalformedPostFile(path.string() + ": tweet text is not a string");
    post.text = j["text"].get<std::string>();
    if (j.contains("id_str") && j["id_str"].is_string()) {
      post.id = j["id_str"].get<std::string>();
    } else if (j.contains("id")) {
      post.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    } else {
      post.id = path.stem().string();
    }
    return post;
  }
  if (j.contains("data") && j["data"].is_object()) {
    post.platform = Platform::reddit;
    const nlohmann::json& data = j["data"];
    nlohmann::json body;
    if (data.contains("children") && data["children"].is_array() && !data["children"].empty()) {
      // submission wrapper: data.children[0].data holds the post
      const nlohmann::json& child = data["children"][0];
      const nlohmann::json& inner = child.contains("data") ? child["data"] : child;
      if (inner.contains("title") && inner["title"].is_string()) {
        post.text = inner["title"].get<std::string>();
      }
      body = inner;
    } else {
      if (data.contains("body") && data["body"].is_string()) {
        post.text = data["body"].get<std::string>();
      }
      body = data;
    }
    if (body.is_object() && body.contains("id") && body["id"].is_string()) {
      post.id = body["id"].get<std::string>();
    } else {
      post.id = path.stem().string();
    }
    return post;
  }
  throw MalformedPostFile(path.string() + ": neither a tweet nor a reddit post");
}

// structure.json: nested object {parent: {child: {...}}}; leaves may be
// encoded as {}, [] or null.
inline void collect_parents(const nlohmann::json& node, const std::string& parent,
                            std::map<std::string, std::string>& parent_of,
                            std::vector<std::string>& order) {
  if (!node.is_object()) return;
  for (const auto& [child, sub] : node.items()) {
    if (!parent.empty()) parent_of[child] = parent;
    order.push_back(child);
    collect_parents(sub, child, parent_of, order);
  }
}

inline std::vector<std::filesystem::path> sorted_json_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) return files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

using LabelMap = std::unordered_map<std::string, Label>;

inline Thread load_thread_dir(const std::filesystem::path& dir, Split split, const LabelMap* labels) {
  auto source_files = sorted_json_files(dir / "source-tweet");
  if (source_files.size() != 1) {
    throw MalformedPostFile(dir.string() + ": expected exactly one source-tweet JSON file");
  }
  RawPost source_raw = parse_post_file(source_files.front());

  const std::filesystem::path structure_path = dir / "structure.json";
  if (!std::filesystem::exists(structure_path)) {
    throw MalformedPostFile(structure_path.string() + ": missing");
  }
  nlohmann::json structure = read_json_file(structure_path);
  if (!structure.is_object() || !structure.contains(source_raw.id)) {
    throw MalformedPostFile(structure_path.string() + ": not rooted at source post " + source_raw.id);
  }
  std::map<std::string, std::string> parent_of;
  std::vector<std::string> structure_order;
  collect_parents(structure[source_raw.id], source_raw.id, parent_of, structure_order);

  std::map<std::string, RawPost> replies;
  for (const auto& path : sorted_json_files(dir / "replies")) {
    RawPost reply = parse_post_file(path);
    replies.emplace(reply.id, std::move(reply));
  }

  const bool labeled = split_is_labeled(split);
  Thread thread;
  thread.source.id = source_raw.id;
  thread.source.text = source_raw.text;
  thread.source.platform = source_raw.platform;
  if (labels != nullptr) {
    auto it = labels->find(source_raw.id);
    if (it != labels->end()) {
      thread.source.label = it->second;
    } else if (labeled) {
      throw UnlabeledPost("source post " + source_raw.id + " missing from label file");
    }
  } else if (labeled) {
    throw UnlabeledPost("source post " + source_raw.id + " missing from label file");
  }

  // Walk reply ids in structure order so parents are visited before
  // children; a dropped (unlabeled) reply drops its whole subtree.
  std::unordered_set<std::string> kept{source_raw.id};
  std::unordered_set<std::string> dropped;
  for (const std::string& id : structure_order) {
    auto reply_it = replies.find(id);
    const std::string& parent = parent_of.at(id);
    if (reply_it == replies.end()) {
      // no backing file; childless entries are deleted posts, but anything
      // underneath them would dangle
      continue;
    }
    if (dropped.count(parent) > 0 || (replies.count(parent) == 0 && parent != source_raw.id)) {
      if (dropped.count(parent) > 0) {
        dropped.insert(id);
        continue;
      }
      throw OrphanReply("reply " + id + ": parent " + parent + " has no post file");
    }
    Post post;
    post.id = id;
    post.text = reply_it->second.text;
    post.platform = reply_it->second.platform;
    post.parent_id = parent;
    if (labels != nullptr) {
      auto it = labels->find(id);
      if (it != labels->end()) post.label = it->second;
    }
    if (labeled && !post.label.has_value()) {
      dropped.insert(id);
      continue;
    }
    kept.insert(id);
    thread.replies.push_back(std::move(post));
  }
  for (const auto& [id, raw] : replies) {
    if (kept.count(id) == 0 && dropped.count(id) == 0) {
      throw OrphanReply("reply " + id + " does not appear in " + structure_path.string());
    }
  }
  return thread;
}

inline std::optional<std::filesystem::path> find_key_file(const std::filesystem::path& root, Split split) {
  std::vector<std::string> candidates;
  switch (split) {
    case Split::train: candidates = {"train-key.json"}; break;
    case Split::dev: candidates = {"dev-key.json"}; break;
    case Split::test: candidates = {"test-key.json", "final-eval-key.json"}; break;
  }
  for (const std::string& name : candidates) {
    if (std::filesystem::exists(root / name)) return root / name;
  }
  return std::nullopt;
}

inline LabelMap load_label_map(const std::filesystem::path& key_path) {
  nlohmann::json j = read_json_file(key_path);
  if (!j.is_object() || !j.contains("subtaskaenglish") || !j["subtaskaenglish"].is_object()) {
    throw MissingLabelFile(key_path.string() + ": no subtaskaenglish key map");
  }
  LabelMap labels;
  for (const auto& [id, value] : j["subtaskaenglish"].items()) {
    auto label = value.is_string() ? parse_label(value.get<std::string>()) : std::nullopt;
    if (!label) {
      throw ParseError(key_path.string() + ": unknown label " + value.dump() + " for post " + id);
    }
    labels[id] = *label;
  }
  return labels;
}

}  // namespace detail

/// Loads one split from the official directory layout into a Corpus.
inline Corpus load_rumoureval_dir(const std::filesystem::path& root, Split split) {
  if (!std::filesystem::is_directory(root)) {
    throw IoError(root.string() + " is not a directory");
  }
  auto key_path = detail::find_key_file(root, split);
  std::optional<detail::LabelMap> labels;
  if (key_path.has_value()) {
    labels = detail::load_label_map(*key_path);
  } else if (split_is_labeled(split)) {
    throw MissingLabelFile("no " + std::string(split_name(split)) + "-key.json under " + root.string());
  }

  // Thread directories are identified by their source-tweet/ subdirectory;
  // sorting keeps load order independent of filesystem enumeration.
  std::vector<std::filesystem::path> thread_dirs;
  for (auto it = std::filesystem::recursive_directory_iterator(root);
       it != std::filesystem::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && std::filesystem::is_directory(it->path() / "source-tweet")) {
      thread_dirs.push_back(it->path());
      it.disable_recursion_pending();
    }
  }
  std::sort(thread_dirs.begin(), thread_dirs.end());

  Corpus corpus;
  corpus.split = split;
  for (const auto& dir : thread_dirs) {
    corpus.threads.push_back(
        detail::load_thread_dir(dir, split, labels.has_value() ? &*labels : nullptr));
  }
  validate(corpus);
  return corpus;
}

}  // namespace stancefusion
