#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stancefusion/error.hpp"
#include "stancefusion/label.hpp"

namespace stancefusion {

enum class Platform : int { twitter = 0, reddit = 1 };

enum class Split : int { train = 0, dev = 1, test = 2 };

constexpr std::string_view platform_name(Platform p) {
  return p == Platform::twitter ? "twitter" : "reddit";
}

inline std::optional<Platform> parse_platform(std::string_view s) {
  if (s == "twitter") return Platform::twitter;
  if (s == "reddit") return Platform::reddit;
  return std::nullopt;
}

constexpr std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  return std::nullopt;
}

/// Whether every post in this split is expected to carry a gold label.
constexpr bool split_is_labeled(Split s) { return s != Split::test; }

/// One post of a conversation thread. The source post is the only one
/// without a parent_id.
struct Post {
  std::string id;
  std::string text;
  std::optional<std::string> parent_id;
  Platform platform = Platform::twitter;
  std::optional<Label> label;

  friend bool operator==(const Post&, const Post&) = default;
};

/// A conversation thread: one source post plus its reply tree. Replies link
/// to their parent via parent_id and every reply is reachable from the
/// source.
struct Thread {
  Post source;
  std::vector<Post> replies;

  std::size_t size() const { return replies.size() + 1; }

  const Post* find(std::string_view id) const {
    if (source.id == id) return &source;
    for (const Post& r : replies) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  friend bool operator==(const Thread&, const Thread&) = default;
};

struct Corpus {
  std::vector<Thread> threads;
  Split split = Split::train;

  std::size_t post_count() const {
    std::size_t n = 0;
    for (const Thread& t : threads) n += t.size();
    return n;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Number of parent links walked from `id` up to the thread source.
/// Throws OrphanReply on a broken link and InvariantViolation on a cycle.
inline int depth_of(const Thread& thread, std::string_view id) {
  const Post* post = thread.find(id);
  if (post == nullptr) throw PostNotInThread("post " + std::string(id) + " not in thread " + thread.source.id);
  int depth = 0;
  const std::size_t limit = thread.size();
  while (post->parent_id.has_value()) {
    const Post* parent = thread.find(*post->parent_id);
    if (parent == nullptr) {
      throw OrphanReply("reply " + post->id + " has unresolvable parent " + *post->parent_id);
    }
    post = parent;
    if (static_cast<std::size_t>(++depth) > limit) {
      throw InvariantViolation("cycle through post " + std::string(id) + " in thread " + thread.source.id);
    }
  }
  return depth;
}

/// Checks the structural invariants: unique ids across the corpus, sources
/// without parents, resolvable and acyclic parent links, and (for labeled
/// splits) a label on every post.
inline void validate(const Corpus& corpus) {
  std::unordered_set<std::string> seen;
  for (const Thread& thread : corpus.threads) {
    if (thread.source.parent_id.has_value()) {
      throw InvariantViolation("source post " + thread.source.id + " has a parent_id");
    }
    if (!seen.insert(thread.source.id).second) {
      throw InvariantViolation("duplicate post id " + thread.source.id);
    }
    for (const Post& r : thread.replies) {
      if (!seen.insert(r.id).second) throw InvariantViolation("duplicate post id " + r.id);
      if (!r.parent_id.has_value()) {
        throw InvariantViolation("reply " + r.id + " has no parent_id");
      }
    }
    for (const Post& r : thread.replies) depth_of(thread, r.id);
    if (split_is_labeled(corpus.split)) {
      if (!thread.source.label.has_value()) throw UnlabeledPost("post " + thread.source.id + " has no label");
      for (const Post& r : thread.replies) {
        if (!r.label.has_value()) throw UnlabeledPost("post " + r.id + " has no label");
      }
    }
  }
}

/// Fraction of posts per class over all posts (source + replies).
/// Fractions are nonnegative and sum to 1.
inline std::array<double, kNumLabels> class_distribution(const Corpus& corpus) {
  std::array<std::size_t, kNumLabels> counts{};
  std::size_t total = 0;
  auto tally = [&](const Post& p) {
    if (!p.label.has_value()) throw UnlabeledPost("post " + p.id + " has no label");
    counts[static_cast<std::size_t>(label_index(*p.label))]++;
    total++;
  };
  for (const Thread& t : corpus.threads) {
    tally(t.source);
    for (const Post& r : t.replies) tally(r);
  }
  if (total == 0) throw EmptyCorpus("class_distribution on empty corpus");
  std::array<double, kNumLabels> out{};
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    out[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return out;
}

}  // namespace stancefusion
