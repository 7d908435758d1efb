#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stancefusion/encoder.hpp"
#include "stancefusion/error.hpp"
#include "stancefusion/fusion.hpp"
#include "stancefusion/mlp.hpp"
#include "stancefusion/tfidf.hpp"

namespace stancefusion {

/// Cost-weight selection: "auto" derives inverse-frequency weights from the
/// training split; "explicit" takes the four values verbatim.
struct CostWeightConfig {
  std::string mode = "auto";
  std::vector<double> values;  // explicit mode only, canonical label order
};

/// The one configuration document driving every command. Key names are part
/// of the CLI contract and documented in the README; unknown keys are
/// rejected so typos fail loudly.
struct ExperimentConfig {
  // data
  std::string raw_dir;
  std::string canonical_dir = "canonical";

  EncoderConfig encoder;
  std::string feature_source = "frozen_mlp_hidden";
  TfidfConfig tfidf;
  int pca_components = 128;

  MlpHyperparams mlp;
  EnsembleHyperparams ensemble;  // per-seed settings; seed field unused
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  CostWeightConfig cost_weights;
  std::string output_dir = "artifacts";

  std::filesystem::path canonical_split_path(Split split) const {
    return std::filesystem::path(canonical_dir) / (std::string(split_name(split)) + ".jsonl");
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& where,
                                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) {
      if (key == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void maybe_get(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("bad value for '") + key + "'");
    }
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config document must be a JSON object");
  detail::reject_unknown_keys(j, "config",
                              {"data", "encoder", "feature_source", "tfidf", "pca_components",
                               "mlp", "ensemble", "cost_weights", "output_dir"});
  ExperimentConfig cfg;
  if (j.contains("data")) {
    const auto& data = j.at("data");
    detail::reject_unknown_keys(data, "data", {"raw_dir", "canonical_dir"});
    detail::maybe_get(data, "raw_dir", cfg.raw_dir);
    detail::maybe_get(data, "canonical_dir", cfg.canonical_dir);
  }
  if (j.contains("encoder")) {
    const auto& enc = j.at("encoder");
    detail::reject_unknown_keys(enc, "encoder",
                                {"name", "dim", "max_tokens", "trainable", "pooling", "cache_path"});
    detail::maybe_get(enc, "name", cfg.encoder.name);
    detail::maybe_get(enc, "dim", cfg.encoder.dim);
    detail::maybe_get(enc, "max_tokens", cfg.encoder.max_tokens);
    detail::maybe_get(enc, "trainable", cfg.encoder.trainable);
    detail::maybe_get(enc, "pooling", cfg.encoder.pooling);
    detail::maybe_get(enc, "cache_path", cfg.encoder.cache_path);
  }
  detail::maybe_get(j, "feature_source", cfg.feature_source);
  if (!parse_feature_source(cfg.feature_source)) {
    throw ConfigError("unknown feature_source '" + cfg.feature_source + "'");
  }
  if (j.contains("tfidf")) {
    const auto& t = j.at("tfidf");
    detail::reject_unknown_keys(
        t, "tfidf", {"lowercase", "token_pattern", "special_tokens", "min_df", "include_pair_second"});
    detail::maybe_get(t, "lowercase", cfg.tfidf.lowercase);
    detail::maybe_get(t, "token_pattern", cfg.tfidf.token_pattern);
    detail::maybe_get(t, "special_tokens", cfg.tfidf.special_tokens);
    detail::maybe_get(t, "min_df", cfg.tfidf.min_df);
    detail::maybe_get(t, "include_pair_second", cfg.tfidf.include_pair_second);
  }
  detail::maybe_get(j, "pca_components", cfg.pca_components);
  if (j.contains("mlp")) {
    const auto& m = j.at("mlp");
    detail::reject_unknown_keys(m, "mlp",
                                {"learning_rate", "epochs", "hidden_units", "batch_size", "seed"});
    detail::maybe_get(m, "learning_rate", cfg.mlp.learning_rate);
    detail::maybe_get(m, "epochs", cfg.mlp.epochs);
    detail::maybe_get(m, "hidden_units", cfg.mlp.hidden_units);
    detail::maybe_get(m, "batch_size", cfg.mlp.batch_size);
    detail::maybe_get(m, "seed", cfg.mlp.seed);
  }
  if (j.contains("ensemble")) {
    const auto& e = j.at("ensemble");
    detail::reject_unknown_keys(e, "ensemble",
                                {"epochs", "learning_rate", "batch_size", "weight_decay",
                                 "freeze_mlp", "seeds"});
    detail::maybe_get(e, "epochs", cfg.ensemble.epochs);
    detail::maybe_get(e, "learning_rate", cfg.ensemble.learning_rate);
    detail::maybe_get(e, "batch_size", cfg.ensemble.batch_size);
    detail::maybe_get(e, "weight_decay", cfg.ensemble.weight_decay);
    detail::maybe_get(e, "freeze_mlp", cfg.ensemble.freeze_mlp);
    detail::maybe_get(e, "seeds", cfg.seeds);
  }
  if (j.contains("cost_weights")) {
    const auto& c = j.at("cost_weights");
    detail::reject_unknown_keys(c, "cost_weights", {"mode", "values"});
    detail::maybe_get(c, "mode", cfg.cost_weights.mode);
    detail::maybe_get(c, "values", cfg.cost_weights.values);
    if (cfg.cost_weights.mode != "auto" && cfg.cost_weights.mode != "explicit") {
      throw ConfigError("cost_weights.mode must be 'auto' or 'explicit'");
    }
  }
  detail::maybe_get(j, "output_dir", cfg.output_dir);

  if (cfg.seeds.empty()) throw ConfigError("ensemble.seeds must not be empty");
  if (cfg.mlp.learning_rate <= 0 || cfg.ensemble.learning_rate <= 0) {
    throw ConfigError("learning rates must be positive");
  }
  if (cfg.mlp.epochs < 1 || cfg.ensemble.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.mlp.batch_size < 1 || cfg.ensemble.batch_size < 1) {
    throw ConfigError("batch sizes must be >= 1");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

/// Re-serialized snapshot of a parsed config, stored in the manifest so a
/// run can be reproduced from its artifact directory alone.
inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["data"] = {{"raw_dir", cfg.raw_dir}, {"canonical_dir", cfg.canonical_dir}};
  j["encoder"] = {{"name", cfg.encoder.name},       {"dim", cfg.encoder.dim},
                  {"max_tokens", cfg.encoder.max_tokens}, {"trainable", cfg.encoder.trainable},
                  {"pooling", cfg.encoder.pooling}, {"cache_path", cfg.encoder.cache_path}};
  j["feature_source"] = cfg.feature_source;
  j["tfidf"] = {{"lowercase", cfg.tfidf.lowercase},
                {"token_pattern", cfg.tfidf.token_pattern},
                {"special_tokens", cfg.tfidf.special_tokens},
                {"min_df", cfg.tfidf.min_df},
                {"include_pair_second", cfg.tfidf.include_pair_second}};
  j["pca_components"] = cfg.pca_components;
  j["mlp"] = {{"learning_rate", cfg.mlp.learning_rate},
              {"epochs", cfg.mlp.epochs},
              {"hidden_units", cfg.mlp.hidden_units},
              {"batch_size", cfg.mlp.batch_size},
              {"seed", cfg.mlp.seed}};
  j["ensemble"] = {{"epochs", cfg.ensemble.epochs},
                   {"learning_rate", cfg.ensemble.learning_rate},
                   {"batch_size", cfg.ensemble.batch_size},
                   {"weight_decay", cfg.ensemble.weight_decay},
                   {"freeze_mlp", cfg.ensemble.freeze_mlp},
                   {"seeds", cfg.seeds}};
  j["cost_weights"] = {{"mode", cfg.cost_weights.mode}, {"values", cfg.cost_weights.values}};
  j["output_dir"] = cfg.output_dir;
  return j;
}

/// Resolves the configured cost weights against a training distribution.
inline CostWeights resolve_cost_weights(const CostWeightConfig& cfg,
                                        const std::array<double, kNumLabels>& train_distribution) {
  if (cfg.mode == "auto") return default_cost_weights(train_distribution);
  if (cfg.values.size() != kNumLabels) {
    throw ConfigError("cost_weights.values must hold exactly " + std::to_string(kNumLabels) +
                      " entries, got " + std::to_string(cfg.values.size()));
  }
  CostWeights weights;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (!(cfg.values[i] > 0.0)) throw ConfigError("cost weights must be positive");
    weights.w[static_cast<Eigen::Index>(i)] = cfg.values[i];
  }
  return weights;
}

}  // namespace stancefusion
