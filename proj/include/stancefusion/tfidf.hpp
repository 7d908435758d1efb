#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "stancefusion/error.hpp"
#include "stancefusion/textprep.hpp"

namespace stancefusion {

/// Tokenizer and vocabulary settings for count features. Tokens are maximal
/// runs matching `token_pattern` (word characters by default, so hashtags
/// lose their '#' but keep the word); the sentinel tokens produced by
/// normalize_text are whitelisted and counted verbatim.
struct TfidfConfig {
  bool lowercase = true;
  std::string token_pattern = R"([A-Za-z0-9_]+)";
  std::vector<std::string> special_tokens = {"$URL$", "$MENTION$"};
  int min_df = 1;
  /// When true, a SequencePair is vectorized as "first second"; when false
  /// the opinion text alone is used.
  bool include_pair_second = true;

  friend bool operator==(const TfidfConfig&, const TfidfConfig&) = default;
};

/// Sparse vector with entries sorted by index.
struct SparseVec {
  int dim = 0;
  std::vector<std::pair<int, double>> entries;

  Eigen::VectorXd dense() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
    for (const auto& [i, v] : entries) out[i] = v;
    return out;
  }

  friend bool operator==(const SparseVec&, const SparseVec&) = default;
};

namespace detail {

inline std::string escape_regex(const std::string& s) {
  static const std::string metachars = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (metachars.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

inline std::string build_token_pattern(const TfidfConfig& cfg) {
  std::string pattern;
  for (const std::string& tok : cfg.special_tokens) {
    pattern += escape_regex(tok);
    pattern += '|';
  }
  pattern += cfg.token_pattern;
  return pattern;
}

// regex construction is costly; transforms run in training loops
inline const std::regex& cached_regex(const std::string& pattern) {
  thread_local std::map<std::string, std::regex> cache;
  auto it = cache.find(pattern);
  if (it == cache.end()) it = cache.emplace(pattern, std::regex(pattern)).first;
  return it->second;
}

}  // namespace detail

inline std::vector<std::string> tokenize(const std::string& text, const TfidfConfig& cfg = {}) {
  const std::regex& re = detail::cached_regex(detail::build_token_pattern(cfg));
  const std::unordered_set<std::string> specials(cfg.special_tokens.begin(),
                                                 cfg.special_tokens.end());
  std::vector<std::string> tokens;
  auto begin = std::sregex_iterator(text.begin(), text.end(), re);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    std::string tok = it->str();
    if (cfg.lowercase && specials.count(tok) == 0) {
      for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

/// Fitted TF-IDF vectorizer. Vocabulary indices are a bijection onto
/// 0..|V|-1 in lexicographic term order, which keeps fitted models
/// deterministic and their serialization stable.
struct TfidfModel {
  std::map<std::string, int> vocabulary;
  Eigen::VectorXd idf;
  TfidfConfig config;

  int vocab_size() const { return static_cast<int>(vocabulary.size()); }
};

/// Smoothed idf: idf(t) = ln((1+N)/(1+df(t))) + 1 over N documents.
inline TfidfModel fit_tfidf(const std::vector<std::string>& docs, TfidfConfig cfg = {}) {
  if (docs.empty()) throw EmptyCorpus("fit_tfidf on empty document list");
  std::map<std::string, int> df;
  for (const std::string& doc : docs) {
    std::set<std::string> seen;
    for (std::string& tok : tokenize(doc, cfg)) seen.insert(std::move(tok));
    for (const std::string& tok : seen) df[tok]++;
  }
  TfidfModel model;
  model.config = std::move(cfg);
  int index = 0;
  for (const auto& [term, count] : df) {
    if (count < model.config.min_df) continue;
    model.vocabulary.emplace(term, index++);
  }
  model.idf.resize(index);
  const double n = static_cast<double>(docs.size());
  for (const auto& [term, col] : model.vocabulary) {
    model.idf[col] = std::log((1.0 + n) / (1.0 + static_cast<double>(df.at(term)))) + 1.0;
  }
  return model;
}

/// tf(t, doc) * idf(t), L2-normalized. Out-of-vocabulary tokens contribute
/// nothing; a document with no known tokens maps to the zero vector.
inline SparseVec transform_tfidf(const TfidfModel& model, const std::string& doc) {
  std::map<int, double> counts;
  for (const std::string& tok : tokenize(doc, model.config)) {
    auto it = model.vocabulary.find(tok);
    if (it != model.vocabulary.end()) counts[it->second] += 1.0;
  }
  SparseVec vec;
  vec.dim = model.vocab_size();
  vec.entries.reserve(counts.size());
  double norm_sq = 0.0;
  for (const auto& [col, tf] : counts) {
    const double w = tf * model.idf[col];
    vec.entries.emplace_back(col, w);
    norm_sq += w * w;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& [col, w] : vec.entries) w *= inv;
  }
  return vec;
}

/// Text a SequencePair contributes to count features.
inline std::string pair_text(const SequencePair& pair, const TfidfConfig& cfg) {
  if (!cfg.include_pair_second || pair.second.empty()) return pair.first;
  return pair.first + " " + pair.second;
}

inline SparseVec transform_tfidf(const TfidfModel& model, const SequencePair& pair) {
  return transform_tfidf(model, pair_text(pair, model.config));
}

}  // namespace stancefusion
