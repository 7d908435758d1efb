#pragma once

#include <cctype>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "stancefusion/corpus.hpp"
#include "stancefusion/error.hpp"
#include "stancefusion/label.hpp"

namespace stancefusion {

/// Detection patterns for text normalization. The defaults catch
/// scheme-prefixed URLs, bare www. links and t.co short links, and
/// @-mentions; matches are replaced by the sentinel tokens below.
struct NormalizeConfig {
  std::string url_pattern = R"((?:[A-Za-z][A-Za-z0-9+.\-]*://[^\s]+)|(?:www\.[^\s]+)|(?:\bt\.co/[^\s]+))";
  std::string mention_pattern = R"(@\w+)";
  std::string url_token = "$URL$";
  std::string mention_token = "$MENTION$";
};

namespace detail {

inline std::string replace_matches(const std::string& text, const std::regex& re,
                                   const std::string& replacement) {
  std::string out;
  out.reserve(text.size());
  auto begin = std::sregex_iterator(text.begin(), text.end(), re);
  auto end = std::sregex_iterator();
  std::size_t last = 0;
  for (auto it = begin; it != end; ++it) {
    out.append(text, last, static_cast<std::size_t>(it->position()) - last);
    out.append(replacement);
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  out.append(text, last, text.size() - last);
  return out;
}

inline std::string collapse_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

}  // namespace detail

/// Replaces URLs and @-mentions with sentinel tokens and collapses runs of
/// whitespace to single spaces. Total and idempotent.
inline std::string normalize_text(const std::string& text, const NormalizeConfig& cfg = {}) {
  const std::regex url_re(cfg.url_pattern);
  const std::regex mention_re(cfg.mention_pattern);
  std::string out = detail::replace_matches(text, url_re, cfg.url_token);
  out = detail::replace_matches(out, mention_re, cfg.mention_token);
  return detail::collapse_whitespace(out);
}

/// The (opinion, target) input pair fed to an encoder. `first` is the text
/// being classified; `second` is the target text and is empty exactly when
/// the post is a source post.
struct SequencePair {
  std::string first;
  std::string second;
  std::string post_id;
  std::optional<Label> label;

  friend bool operator==(const SequencePair&, const SequencePair&) = default;
};

/// Special tokens wrapped around encoder input. `sep` is the doubled
/// end-tag pair placed between the two sequences.
struct MarkerSet {
  std::string start = "<s>";
  std::string end = "</s>";
  std::string sep = "</s></s>";
};

/// Builds the training example for one post of a thread. Texts are used
/// as-is and are expected to be pre-normalized.
///
///   source post  -> (source text, "")
///   direct reply -> (reply text, source text)
///   nested reply -> (reply text + " " + parent reply text, source text)
inline SequencePair build_training_example(const Post& post, const Thread& thread) {
  const Post* found = thread.find(post.id);
  if (found == nullptr || *found != post) {
    throw PostNotInThread("post " + post.id + " is not part of thread " + thread.source.id);
  }
  SequencePair pair;
  pair.post_id = post.id;
  pair.label = post.label;
  if (!post.parent_id.has_value()) {
    pair.first = post.text;
    return pair;
  }
  pair.second = thread.source.text;
  if (*post.parent_id == thread.source.id) {
    pair.first = post.text;
    return pair;
  }
  const Post* parent = thread.find(*post.parent_id);
  if (parent == nullptr) {
    throw OrphanReply("reply " + post.id + " has unresolvable parent " + *post.parent_id);
  }
  pair.first = post.text;
  if (!parent->text.empty()) {
    if (!pair.first.empty()) pair.first += ' ';
    pair.first += parent->text;
  }
  return pair;
}

namespace detail {

// "</s></s>" renders as two space-separated tags; seps without adjacent
// tag boundaries stay a single token.
inline std::string spaced_sep(const std::string& sep) {
  std::string out;
  out.reserve(sep.size() + 2);
  for (std::size_t i = 0; i < sep.size(); ++i) {
    out.push_back(sep[i]);
    if (sep[i] == '>' && i + 1 < sep.size() && sep[i + 1] == '<') out.push_back(' ');
  }
  return out;
}

}  // namespace detail

/// Renders the marker-wrapped encoder input string:
/// "start first sep second end", joined by single spaces, with the second
/// segment omitted when empty.
inline std::string render_encoder_input(const SequencePair& pair, const MarkerSet& markers = {}) {
  std::string out = markers.start;
  out += ' ';
  out += pair.first;
  out += ' ';
  out += detail::spaced_sep(markers.sep);
  if (!pair.second.empty()) {
    out += ' ';
    out += pair.second;
  }
  out += ' ';
  out += markers.end;
  return out;
}

/// Normalizes every post of a corpus and builds one SequencePair per post,
/// in thread order.
inline std::vector<SequencePair> build_sequence_pairs(const Corpus& corpus,
                                                      const NormalizeConfig& cfg = {}) {
  std::vector<SequencePair> pairs;
  pairs.reserve(corpus.post_count());
  for (const Thread& thread : corpus.threads) {
    Thread normalized = thread;
    normalized.source.text = normalize_text(thread.source.text, cfg);
    for (Post& r : normalized.replies) r.text = normalize_text(r.text, cfg);
    pairs.push_back(build_training_example(normalized.source, normalized));
    for (const Post& r : normalized.replies) {
      pairs.push_back(build_training_example(r, normalized));
    }
  }
  return pairs;
}

}  // namespace stancefusion
