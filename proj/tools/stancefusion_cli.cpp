// Batch CLI for the stance-classification pipeline:
//
//   stancefusion convert        raw directory layout -> canonical JSONL
//   stancefusion train-mlp      TF-IDF + feature MLP, artifacts + dev trace
//   stancefusion train-ensemble seeded fusion runs + best-on-dev selection
//   stancefusion evaluate       metrics (or predictions on unlabeled splits)
//   stancefusion report         error-analysis report with exhibits
//
// Exit codes: 0 success, 2 input/config error, 3 I/O error, 4 refusing to
// overwrite existing artifacts (pass --overwrite).

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stancefusion/stancefusion.hpp"

namespace fs = std::filesystem;
using namespace stancefusion;

namespace {

struct WouldOverwrite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const WouldOverwrite& e) {
    std::cerr << "error: " << e.what() << " (pass --overwrite to replace)\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

void refuse_existing(const std::vector<fs::path>& paths, bool overwrite) {
  if (overwrite) return;
  for (const fs::path& p : paths) {
    if (fs::exists(p)) throw WouldOverwrite(p.string() + " already exists");
  }
}

Corpus load_canonical_split(const ExperimentConfig& cfg, Split split) {
  const fs::path path = cfg.canonical_split_path(split);
  if (!fs::exists(path)) {
    throw Error("missing " + std::string(split_name(split)) + " split at " + path.string() +
                "; run `stancefusion convert` first");
  }
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return from_canonical_jsonl(in);
}

std::vector<LabeledVector> vectorize_labeled(const std::vector<SequencePair>& pairs,
                                             const TfidfModel& tfidf) {
  std::vector<LabeledVector> out;
  out.reserve(pairs.size());
  for (const SequencePair& p : pairs) {
    if (!p.label.has_value()) throw UnlabeledPost("pair " + p.post_id + " has no label");
    out.push_back({transform_tfidf(tfidf, p), *p.label});
  }
  return out;
}

std::shared_ptr<EmbeddingCache> open_cache(const ExperimentConfig& cfg) {
  if (cfg.encoder.cache_path.empty()) return nullptr;
  return std::make_shared<EmbeddingCache>(cfg.encoder.cache_path);
}

// ---- convert ----

void cmd_convert(const std::string& raw, const std::string& split_name_arg,
                 const std::string& out, bool overwrite) {
  auto split = parse_split(split_name_arg);
  if (!split) throw ConfigError("unknown split '" + split_name_arg + "'");
  refuse_existing({fs::path(out)}, overwrite);
  Corpus corpus = load_rumoureval_dir(raw, *split);

  const fs::path out_path(out);
  if (out_path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out_path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + out_path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream os(out_path);
  if (!os) throw IoError("cannot open " + out + " for writing");
  write_canonical_jsonl(corpus, os);
  if (!os) throw IoError("failed writing " + out);
  std::cout << "wrote " << corpus.post_count() << " posts in " << corpus.threads.size()
            << " threads to " << out << '\n';
}

// ---- train-mlp ----

void cmd_train_mlp(ExperimentConfig cfg, bool overwrite) {
  ArtifactDir artifacts(cfg.output_dir);
  const std::vector<std::string> outputs = {"tfidf.json", "mlp.json", "mlp_trace.json",
                                            "mlp_dev_report.json"};
  std::vector<fs::path> paths;
  for (const auto& name : outputs) paths.push_back(artifacts.path(name));
  refuse_existing(paths, overwrite);

  const Corpus train_corpus = load_canonical_split(cfg, Split::train);
  const Corpus dev_corpus = load_canonical_split(cfg, Split::dev);
  const auto train_pairs = build_sequence_pairs(train_corpus);
  const auto dev_pairs = build_sequence_pairs(dev_corpus);

  std::vector<std::string> docs;
  docs.reserve(train_pairs.size());
  for (const SequencePair& p : train_pairs) docs.push_back(pair_text(p, cfg.tfidf));
  auto tfidf = std::make_shared<const TfidfModel>(fit_tfidf(docs, cfg.tfidf));

  MlpHyperparams hp = cfg.mlp;
  hp.cost_weights = resolve_cost_weights(cfg.cost_weights, class_distribution(train_corpus));

  const auto train_vecs = vectorize_labeled(train_pairs, *tfidf);
  const auto dev_vecs = vectorize_labeled(dev_pairs, *tfidf);
  MlpTrainResult result = train_mlp(train_vecs, dev_vecs, hp, tfidf);

  std::vector<Label> preds;
  std::vector<Label> golds;
  preds.reserve(dev_vecs.size());
  for (const LabeledVector& ex : dev_vecs) {
    preds.push_back(mlp_predict(result.model, ex.x));
    golds.push_back(ex.label);
  }
  const EvalReport dev_report = make_eval_report(preds, golds);

  write_json_file(tfidf_to_json(*tfidf), artifacts.path("tfidf.json"));
  write_json_file(mlp_to_json(result.model), artifacts.path("mlp.json"));
  write_json_file(trace_to_json(result.trace), artifacts.path("mlp_trace.json"));
  write_json_file(report_to_json(dev_report), artifacts.path("mlp_dev_report.json"));
  for (const auto& name : outputs) artifacts.record(name);
  artifacts.set_config_snapshot(config_to_json(cfg));
  artifacts.write_manifest();
  std::cout << std::fixed << std::setprecision(4)
            << "trained MLP: dev macro_f1=" << dev_report.macro_f1
            << " accuracy=" << dev_report.accuracy << '\n';
}

// ---- train-ensemble ----

struct SeedRun {
  std::uint64_t seed = 0;
  EvalReport dev_report;
  Json fusion_json;
  std::vector<EpochStats> trace;
};

void cmd_train_ensemble(ExperimentConfig cfg, bool overwrite) {
  ArtifactDir artifacts(cfg.output_dir);
  std::vector<fs::path> outputs = {artifacts.path("fusion.json"), artifacts.path("dev_report.json"),
                                   artifacts.path("seeds")};
  refuse_existing(outputs, overwrite);
  if (overwrite && fs::exists(artifacts.path("seeds"))) {
    fs::remove_all(artifacts.path("seeds"));
  }

  const auto kind = *parse_feature_source(cfg.feature_source);
  const Corpus train_corpus = load_canonical_split(cfg, Split::train);
  const Corpus dev_corpus = load_canonical_split(cfg, Split::dev);
  const auto train_pairs = build_sequence_pairs(train_corpus);
  const auto dev_pairs = build_sequence_pairs(dev_corpus);

  // feature-source prerequisites come from this artifact directory
  std::shared_ptr<const TfidfModel> tfidf;
  std::shared_ptr<const PcaModel> pca;
  std::shared_ptr<MlpModel> frozen_mlp;
  const bool needs_tfidf = kind != FeatureSourceKind::none;
  const bool needs_trained_mlp = kind == FeatureSourceKind::frozen_mlp_hidden ||
                                 kind == FeatureSourceKind::frozen_mlp_output;
  if (needs_tfidf) {
    if (!artifacts.has("tfidf.json")) {
      throw MissingSubmodel("feature source '" + cfg.feature_source + "' needs " +
                            artifacts.path("tfidf.json").string() +
                            "; run `stancefusion train-mlp` first");
    }
    tfidf = std::make_shared<const TfidfModel>(
        tfidf_from_json(read_json_artifact(artifacts.path("tfidf.json"))));
  }
  if (needs_trained_mlp || kind == FeatureSourceKind::joint_mlp_output) {
    if (needs_trained_mlp && !artifacts.has("mlp.json")) {
      throw MissingSubmodel("feature source '" + cfg.feature_source + "' needs " +
                            artifacts.path("mlp.json").string() +
                            "; run `stancefusion train-mlp` first");
    }
    if (artifacts.has("mlp.json")) {
      frozen_mlp = std::make_shared<MlpModel>(mlp_from_json(read_json_artifact(artifacts.path("mlp.json"))));
      if (frozen_mlp->tfidf == nullptr) frozen_mlp->tfidf = tfidf;
    }
  }
  if (kind == FeatureSourceKind::pca_tfidf) {
    if (artifacts.has("pca.json") && !overwrite) {
      pca = std::make_shared<const PcaModel>(
          pca_from_json(read_json_artifact(artifacts.path("pca.json"))));
    } else {
      std::vector<SparseVec> train_vecs;
      train_vecs.reserve(train_pairs.size());
      for (const SequencePair& p : train_pairs) train_vecs.push_back(transform_tfidf(*tfidf, p));
      PcaResult fitted = reduce_pca(train_vecs, cfg.pca_components);
      pca = std::make_shared<const PcaModel>(std::move(fitted.model));
      write_json_file(pca_to_json(*pca), artifacts.path("pca.json"));
      artifacts.record("pca.json");
    }
  }

  auto cache = open_cache(cfg);
  EnsembleHyperparams hp = cfg.ensemble;
  hp.cost_weights = resolve_cost_weights(cfg.cost_weights, class_distribution(train_corpus));

  std::vector<SeedRun> runs;
  for (std::uint64_t seed : cfg.seeds) {
    hp.seed = seed;
    FeatureSource source;
    source.kind = kind;
    source.tfidf = tfidf;
    source.pca = pca;
    if (kind == FeatureSourceKind::joint_mlp_output) {
      // trains jointly: each seed gets its own copy (or its own fresh init)
      if (frozen_mlp != nullptr) {
        source.mlp = std::make_shared<MlpModel>(*frozen_mlp);
      } else {
        source.mlp = std::make_shared<MlpModel>(
            init_mlp(tfidf->vocab_size(), cfg.mlp.hidden_units, seed, tfidf));
      }
    } else if (needs_trained_mlp) {
      source.mlp = frozen_mlp;
    }
    auto encoder = make_encoder(cfg.encoder, cache);

    EnsembleTrainResult result =
        train_ensemble(train_pairs, dev_pairs, encoder, std::move(source), hp, MarkerSet{},
                       cache.get());
    SeedRun run;
    run.seed = seed;
    run.dev_report = error_report(result.model, dev_pairs, 0, cache.get());
    run.fusion_json = fusion_to_json(result.model);
    run.trace = std::move(result.trace);
    runs.push_back(std::move(run));

    const fs::path seed_dir = artifacts.path("seeds") / ("seed-" + std::to_string(seed));
    fs::create_directories(seed_dir);
    write_json_file(runs.back().fusion_json, seed_dir / "fusion.json");
    write_json_file(trace_to_json(runs.back().trace), seed_dir / "trace.json");
    write_json_file(report_to_json(runs.back().dev_report), seed_dir / "dev_report.json");
    std::cout << std::fixed << std::setprecision(4) << "seed " << seed
              << ": dev macro_f1=" << runs.back().dev_report.macro_f1 << '\n';
  }

  const std::size_t best = select_best_seed(runs);
  write_json_file(runs[best].fusion_json, artifacts.path("fusion.json"));
  write_json_file(report_to_json(runs[best].dev_report), artifacts.path("dev_report.json"));
  artifacts.record("fusion.json");
  artifacts.record("dev_report.json");
  for (const SeedRun& run : runs) {
    const std::string base = "seeds/seed-" + std::to_string(run.seed) + "/";
    artifacts.record(base + "fusion.json");
    artifacts.record(base + "trace.json");
    artifacts.record(base + "dev_report.json");
  }
  artifacts.set_chosen_seed(runs[best].seed);
  artifacts.set_config_snapshot(config_to_json(cfg));
  artifacts.write_manifest();
  std::cout << std::fixed << std::setprecision(4) << "chose seed " << runs[best].seed
            << " (dev macro_f1=" << runs[best].dev_report.macro_f1 << ")\n";
}

// ---- evaluate / report ----

struct LoadedModel {
  std::optional<FusionModel> fusion;
  std::optional<MlpModel> mlp;
};

LoadedModel load_model(const fs::path& path, std::shared_ptr<EmbeddingCache> cache) {
  if (!fs::exists(path)) throw Error("model artifact " + path.string() + " does not exist");
  const Json j = read_json_artifact(path);
  LoadedModel model;
  const std::string kind = j.value("kind", "");
  if (kind == "stancefusion.fusion") {
    model.fusion = fusion_from_json(j, nullptr, std::move(cache));
  } else if (kind == "stancefusion.mlp") {
    model.mlp = mlp_from_json(j);
    if (model.mlp->tfidf == nullptr) {
      throw MissingSubmodel(path.string() + " carries no TF-IDF vectorizer");
    }
  } else {
    throw ParseError(path.string() + " is neither a fusion nor an mlp artifact");
  }
  return model;
}

std::vector<Label> predict_all(const LoadedModel& model, const std::vector<SequencePair>& pairs,
                               EmbeddingCache* cache) {
  std::vector<Label> preds;
  preds.reserve(pairs.size());
  for (const SequencePair& p : pairs) {
    if (model.fusion.has_value()) {
      preds.push_back(predict(*model.fusion, p, cache));
    } else {
      preds.push_back(mlp_predict(*model.mlp, transform_tfidf(*model.mlp->tfidf, p)));
    }
  }
  return preds;
}

void write_eval_outputs(const std::string& split_arg, const std::string& stem,
                        const EvalReport& report, bool overwrite, ArtifactDir& artifacts) {
  fs::create_directories(artifacts.path("eval"));
  const std::string base = "eval/" + split_arg + "_" + stem;
  refuse_existing({artifacts.path(base + ".json"), artifacts.path(base + ".txt")}, overwrite);
  write_json_file(report_to_json(report), artifacts.path(base + ".json"));
  std::ofstream txt(artifacts.path(base + ".txt"));
  if (!txt) throw IoError("cannot write " + artifacts.path(base + ".txt").string());
  txt << format_report(report);
  artifacts.record(base + ".json");
  artifacts.record(base + ".txt");
  artifacts.write_manifest();
}

void cmd_evaluate(ExperimentConfig cfg, std::string model_path, const std::string& split_arg,
                  int exhibits, const std::string& stem, bool overwrite) {
  auto split = parse_split(split_arg);
  if (!split) throw ConfigError("unknown split '" + split_arg + "'");
  if (model_path.empty()) model_path = (fs::path(cfg.output_dir) / "fusion.json").string();
  auto cache = open_cache(cfg);
  const LoadedModel model = load_model(model_path, cache);

  const Corpus corpus = load_canonical_split(cfg, *split);
  const auto pairs = build_sequence_pairs(corpus);
  const std::vector<Label> preds = predict_all(model, pairs, cache.get());

  ArtifactDir artifacts(cfg.output_dir);
  bool labeled = !pairs.empty();
  for (const SequencePair& p : pairs) labeled = labeled && p.label.has_value();
  if (!labeled) {
    fs::create_directories(artifacts.path("eval"));
    const std::string name = "eval/" + split_arg + "_predictions.jsonl";
    refuse_existing({artifacts.path(name)}, overwrite);
    std::ofstream out(artifacts.path(name));
    if (!out) throw IoError("cannot write " + artifacts.path(name).string());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      nlohmann::ordered_json line;
      line["id"] = pairs[i].post_id;
      line["predicted"] = label_name(preds[i]);
      out << line.dump() << '\n';
    }
    artifacts.record(name);
    artifacts.write_manifest();
    std::cout << "split '" << split_arg << "' is unlabeled: wrote predictions to "
              << artifacts.path(name).string() << '\n';
    return;
  }

  const EvalReport report = make_eval_report(preds, pairs, exhibits);
  write_eval_outputs(split_arg, stem, report, overwrite, artifacts);
  std::cout << std::fixed << std::setprecision(4) << "macro_f1=" << report.macro_f1
            << " accuracy=" << report.accuracy << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-fusion stance classification pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string raw_dir;
  std::string split_arg;
  std::string out_path;
  std::string model_path;
  std::string output_dir_override;
  std::vector<std::uint64_t> seeds_override;
  std::optional<std::uint64_t> seed_override;
  int exhibits = 2;
  bool overwrite = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("--output-dir", output_dir_override, "override output_dir from the config");
    cmd->add_flag("--overwrite", overwrite, "replace existing artifacts");
  };
  auto apply_overrides = [&](ExperimentConfig cfg) {
    if (!output_dir_override.empty()) cfg.output_dir = output_dir_override;
    if (seed_override.has_value()) cfg.mlp.seed = *seed_override;
    if (!seeds_override.empty()) cfg.seeds = seeds_override;
    return cfg;
  };

  CLI::App* convert = app.add_subcommand("convert", "raw layout -> canonical JSONL");
  convert->add_option("--raw", raw_dir, "root of the raw directory layout")->required();
  convert->add_option("--split", split_arg, "train | dev | test")->required();
  convert->add_option("--out", out_path, "output JSONL path")->required();
  convert->add_flag("--overwrite", overwrite, "replace an existing output file");

  CLI::App* train_mlp_cmd = app.add_subcommand("train-mlp", "fit TF-IDF and train the MLP");
  add_common(train_mlp_cmd);
  train_mlp_cmd->add_option("--seed", seed_override, "override mlp.seed");

  CLI::App* train_ensemble_cmd =
      app.add_subcommand("train-ensemble", "seeded fusion training + selection");
  add_common(train_ensemble_cmd);
  train_ensemble_cmd->add_option("--seeds", seeds_override, "override ensemble seed list");

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score a stored model on a split");
  add_common(evaluate_cmd);
  evaluate_cmd->add_option("--model", model_path, "model artifact (default <output_dir>/fusion.json)");
  evaluate_cmd->add_option("--split", split_arg, "train | dev | test")->required();

  CLI::App* report_cmd = app.add_subcommand("report", "error-analysis report with exhibits");
  add_common(report_cmd);
  report_cmd->add_option("--model", model_path, "model artifact (default <output_dir>/fusion.json)");
  report_cmd->add_option("--split", split_arg, "train | dev | test")->required();
  report_cmd->add_option("--k", exhibits, "max exhibits per (gold, predicted) cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (convert->parsed()) {
    return guarded([&] { cmd_convert(raw_dir, split_arg, out_path, overwrite); });
  }
  if (train_mlp_cmd->parsed()) {
    return guarded([&] { cmd_train_mlp(apply_overrides(load_config(config_path)), overwrite); });
  }
  if (train_ensemble_cmd->parsed()) {
    return guarded(
        [&] { cmd_train_ensemble(apply_overrides(load_config(config_path)), overwrite); });
  }
  if (evaluate_cmd->parsed()) {
    return guarded([&] {
      cmd_evaluate(apply_overrides(load_config(config_path)), model_path, split_arg,
                   /*exhibits=*/0, "report", overwrite);
    });
  }
  if (report_cmd->parsed()) {
    return guarded([&] {
      cmd_evaluate(apply_overrides(load_config(config_path)), model_path, split_arg, exhibits,
                   "error_report", overwrite);
    });
  }
  return 2;
}
