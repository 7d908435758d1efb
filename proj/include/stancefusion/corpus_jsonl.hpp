#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stancefusion/corpus.hpp"
#include "stancefusion/error.hpp"

namespace stancefusion {

// Canonical JSONL interchange format: one post per line, keys emitted in
// the fixed order {id, text, parent_id, platform, label, thread_id, split}
// with no insignificant whitespace, so output is bit-stable. parent_id and
// label are null when absent; thread_id is the id of the thread's source
// post.

inline void write_canonical_jsonl(const Corpus& corpus, std::ostream& os) {
  validate(corpus);
  auto emit = [&](const Post& p, const std::string& thread_id) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["text"] = p.text;
    if (p.parent_id.has_value()) {
      j["parent_id"] = *p.parent_id;
    } else {
      j["parent_id"] = nullptr;
    }
    j["platform"] = platform_name(p.platform);
    if (p.label.has_value()) {
      j["label"] = label_name(*p.label);
    } else {
      j["label"] = nullptr;
    }
    j["thread_id"] = thread_id;
    j["split"] = split_name(corpus.split);
    os << j.dump() << '\n';
  };
  for (const Thread& t : corpus.threads) {
    emit(t.source, t.source.id);
    for (const Post& r : t.replies) emit(r, t.source.id);
  }
}

inline std::string to_canonical_jsonl(const Corpus& corpus) {
  std::ostringstream os;
  write_canonical_jsonl(corpus, os);
  return os.str();
}

inline Corpus from_canonical_jsonl(std::istream& is) {
  struct PendingThread {
    std::vector<Post> posts;  // line order preserved
  };
  std::vector<std::string> thread_order;
  std::map<std::string, PendingThread> threads;
  std::optional<Split> split;

  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError("line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    if (!j.is_object()) fail("not a JSON object");
    for (const char* key : {"id", "text", "parent_id", "platform", "label", "thread_id", "split"}) {
      if (!j.contains(key)) fail(std::string("missing key '") + key + "'");
    }
    Post p;
    if (!j["id"].is_string() || !j["text"].is_string() || !j["thread_id"].is_string()) {
      fail("id, text and thread_id must be strings");
    }
    p.id = j["id"].get<std::string>();
    p.text = j["text"].get<std::string>();
    if (!j["parent_id"].is_null()) {
      if (!j["parent_id"].is_string()) fail("parent_id must be a string or null");
      p.parent_id = j["parent_id"].get<std::string>();
    }
    auto platform = j["platform"].is_string() ? parse_platform(j["platform"].get<std::string>())
                                              : std::nullopt;
    if (!platform) fail("unknown platform " + j["platform"].dump());
    p.platform = *platform;
    if (!j["label"].is_null()) {
      auto label = j["label"].is_string() ? parse_label(j["label"].get<std::string>()) : std::nullopt;
      if (!label) fail("unknown label " + j["label"].dump());
      p.label = *label;
    }
    auto line_split = j["split"].is_string() ? parse_split(j["split"].get<std::string>()) : std::nullopt;
    if (!line_split) fail("unknown split " + j["split"].dump());
    if (split.has_value() && *split != *line_split) fail("split differs from earlier lines");
    split = *line_split;

    const std::string thread_id = j["thread_id"].get<std::string>();
    auto [it, inserted] = threads.try_emplace(thread_id);
    if (inserted) thread_order.push_back(thread_id);
    it->second.posts.push_back(std::move(p));
  }

  Corpus corpus;
  corpus.split = split.value_or(Split::train);
  for (const std::string& tid : thread_order) {
    PendingThread& pending = threads.at(tid);
    Thread thread;
    bool have_source = false;
    for (Post& p : pending.posts) {
      if (!p.parent_id.has_value()) {
        if (have_source) throw InvariantViolation("thread " + tid + " has more than one source post");
        thread.source = std::move(p);
        have_source = true;
      } else {
        thread.replies.push_back(std::move(p));
      }
    }
    if (!have_source) throw InvariantViolation("thread " + tid + " has no source post");
    if (thread.source.id != tid) {
      throw InvariantViolation("thread_id " + tid + " does not match source post id " + thread.source.id);
    }
    corpus.threads.push_back(std::move(thread));
  }
  validate(corpus);
  return corpus;
}

inline Corpus from_canonical_jsonl(const std::string& text) {
  std::istringstream is(text);
  return from_canonical_jsonl(is);
}

}  // namespace stancefusion
