#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "stancefusion/encoder.hpp"
#include "stancefusion/error.hpp"
#include "stancefusion/eval.hpp"
#include "stancefusion/fusion.hpp"
#include "stancefusion/mlp.hpp"
#include "stancefusion/pca.hpp"
#include "stancefusion/tfidf.hpp"

namespace stancefusion {

// JSON artifact serialization. Keys are emitted in fixed order and doubles
// round-trip exactly (shortest-representation printing), so re-serializing
// a loaded model is byte-identical. Every artifact carries a "kind" and a
// "format_version" so loaders can dispatch and reject future layouts.

using Json = nlohmann::ordered_json;

namespace detail {

inline Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw ParseError("matrix data length does not match rows*cols");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[at++].get<double>();
  }
  return m;
}

inline Json vector_to_json(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline Eigen::VectorXd vector_from_json(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline void expect_kind(const Json& j, const std::string& kind) {
  if (!j.is_object() || j.value("kind", "") != kind) {
    throw ParseError("artifact is not a '" + kind + "' document");
  }
  if (j.value("format_version", 0) != 1) {
    throw ParseError("unsupported format_version in '" + kind + "' artifact");
  }
}

}  // namespace detail

// ---- TF-IDF ----

inline Json tfidf_to_json(const TfidfModel& model) {
  Json j;
  j["kind"] = "stancefusion.tfidf";
  j["format_version"] = 1;
  Json cfg;
  cfg["lowercase"] = model.config.lowercase;
  cfg["token_pattern"] = model.config.token_pattern;
  cfg["special_tokens"] = model.config.special_tokens;
  cfg["min_df"] = model.config.min_df;
  cfg["include_pair_second"] = model.config.include_pair_second;
  j["config"] = std::move(cfg);
  Json terms = Json::array();  // in index order, so vocabulary round-trips exactly
  std::vector<const std::string*> by_index(model.vocabulary.size());
  for (const auto& [term, index] : model.vocabulary) by_index[static_cast<std::size_t>(index)] = &term;
  for (const std::string* term : by_index) terms.push_back(*term);
  j["terms"] = std::move(terms);
  j["idf"] = detail::vector_to_json(model.idf);
  return j;
}

inline TfidfModel tfidf_from_json(const Json& j) {
  detail::expect_kind(j, "stancefusion.tfidf");
  TfidfModel model;
  const Json& cfg = j.at("config");
  model.config.lowercase = cfg.at("lowercase").get<bool>();
  model.config.token_pattern = cfg.at("token_pattern").get<std::string>();
  model.config.special_tokens = cfg.at("special_tokens").get<std::vector<std::string>>();
  model.config.min_df = cfg.at("min_df").get<int>();
  model.config.include_pair_second = cfg.at("include_pair_second").get<bool>();
  int index = 0;
  for (const auto& term : j.at("terms")) {
    model.vocabulary.emplace(term.get<std::string>(), index++);
  }
  model.idf = detail::vector_from_json(j.at("idf"));
  if (model.idf.size() != static_cast<Eigen::Index>(model.vocabulary.size())) {
    throw ParseError("tfidf artifact: idf length does not match vocabulary");
  }
  return model;
}

// ---- PCA ----

inline Json pca_to_json(const PcaModel& model) {
  Json j;
  j["kind"] = "stancefusion.pca";
  j["format_version"] = 1;
  j["mean"] = detail::vector_to_json(model.mean);
  j["components"] = detail::matrix_to_json(model.components);
  j["explained_variance"] = detail::vector_to_json(model.explained_variance);
  j["rank_deficient"] = model.rank_deficient;
  return j;
}

inline PcaModel pca_from_json(const Json& j) {
  detail::expect_kind(j, "stancefusion.pca");
  PcaModel model;
  model.mean = detail::vector_from_json(j.at("mean"));
  model.components = detail::matrix_from_json(j.at("components"));
  model.explained_variance = detail::vector_from_json(j.at("explained_variance"));
  model.rank_deficient = j.at("rank_deficient").get<bool>();
  return model;
}

// ---- MLP ----

inline Json mlp_to_json(const MlpModel& model) {
  Json j;
  j["kind"] = "stancefusion.mlp";
  j["format_version"] = 1;
  j["w1"] = detail::matrix_to_json(model.w1);
  j["b1"] = detail::vector_to_json(model.b1);
  j["w2"] = detail::matrix_to_json(model.w2);
  j["b2"] = detail::vector_to_json(model.b2);
  j["tfidf"] = model.tfidf != nullptr ? tfidf_to_json(*model.tfidf) : Json(nullptr);
  return j;
}

inline MlpModel mlp_from_json(const Json& j) {
  detail::expect_kind(j, "stancefusion.mlp");
  MlpModel model;
  model.w1 = detail::matrix_from_json(j.at("w1"));
  model.b1 = detail::vector_from_json(j.at("b1"));
  model.w2 = detail::matrix_from_json(j.at("w2"));
  model.b2 = detail::vector_from_json(j.at("b2"));
  if (!j.at("tfidf").is_null()) {
    model.tfidf = std::make_shared<const TfidfModel>(tfidf_from_json(j.at("tfidf")));
  }
  return model;
}

// ---- encoder descriptor ----

inline Json encoder_to_json(const EncoderBackend& backend) {
  Json j;
  j["name"] = backend.name();
  j["dim"] = backend.dim();
  j["max_tokens"] = backend.max_tokens();
  j["trainable"] = backend.trainable();
  const auto* adapter = dynamic_cast<const PretrainedEncoderAdapter*>(&backend);
  j["pooling"] = adapter != nullptr ? Json(adapter->pooling()) : Json(nullptr);
  j["params"] = backend.trainable() ? detail::vector_to_json(backend.params()) : Json(nullptr);
  return j;
}

inline std::shared_ptr<EncoderBackend> encoder_from_json(const Json& j,
                                                         std::shared_ptr<EmbeddingCache> cache = nullptr) {
  EncoderConfig cfg;
  cfg.name = j.at("name").get<std::string>();
  cfg.dim = j.at("dim").get<int>();
  cfg.max_tokens = j.at("max_tokens").get<int>();
  cfg.trainable = j.at("trainable").get<bool>();
  if (j.contains("pooling") && !j.at("pooling").is_null()) {
    cfg.pooling = j.at("pooling").get<std::string>();
  }
  std::shared_ptr<EncoderBackend> backend = make_encoder(cfg, std::move(cache));
  if (j.contains("params") && !j.at("params").is_null()) {
    backend->set_params(detail::vector_from_json(j.at("params")));
  }
  return backend;
}

// ---- fusion ----

inline Json fusion_to_json(const FusionModel& model) {
  Json j;
  j["kind"] = "stancefusion.fusion";
  j["format_version"] = 1;
  j["encoder"] = encoder_to_json(*model.encoder);
  Json markers;
  markers["start"] = model.markers.start;
  markers["end"] = model.markers.end;
  markers["sep"] = model.markers.sep;
  j["markers"] = std::move(markers);
  Json source;
  source["kind"] = feature_source_name(model.source.kind);
  source["tfidf"] = model.source.tfidf != nullptr ? tfidf_to_json(*model.source.tfidf) : Json(nullptr);
  source["pca"] = model.source.pca != nullptr ? pca_to_json(*model.source.pca) : Json(nullptr);
  source["mlp"] = model.source.mlp != nullptr ? mlp_to_json(*model.source.mlp) : Json(nullptr);
  j["source"] = std::move(source);
  j["w"] = detail::matrix_to_json(model.w);
  j["b"] = detail::vector_to_json(model.b);
  return j;
}

/// Rebuilds a fusion model, reconstructing the encoder from its descriptor
/// (or adopting `encoder_override`) and validating the head width against
/// encoder dim + feature dim.
inline FusionModel fusion_from_json(const Json& j,
                                    std::shared_ptr<EncoderBackend> encoder_override = nullptr,
                                    std::shared_ptr<EmbeddingCache> cache = nullptr) {
  detail::expect_kind(j, "stancefusion.fusion");
  FusionModel model;
  model.encoder = encoder_override != nullptr ? std::move(encoder_override)
                                              : encoder_from_json(j.at("encoder"), std::move(cache));
  const Json& markers = j.at("markers");
  model.markers.start = markers.at("start").get<std::string>();
  model.markers.end = markers.at("end").get<std::string>();
  model.markers.sep = markers.at("sep").get<std::string>();
  const Json& source = j.at("source");
  auto kind = parse_feature_source(source.at("kind").get<std::string>());
  if (!kind) throw ParseError("fusion artifact: unknown feature source " + source.at("kind").dump());
  model.source.kind = *kind;
  if (!source.at("tfidf").is_null()) {
    model.source.tfidf = std::make_shared<const TfidfModel>(tfidf_from_json(source.at("tfidf")));
  }
  if (!source.at("pca").is_null()) {
    model.source.pca = std::make_shared<const PcaModel>(pca_from_json(source.at("pca")));
  }
  if (!source.at("mlp").is_null()) {
    model.source.mlp = std::make_shared<MlpModel>(mlp_from_json(source.at("mlp")));
  }
  model.w = detail::matrix_from_json(j.at("w"));
  model.b = detail::vector_from_json(j.at("b"));
  const int expected = model.encoder->dim() + model.source.feature_dim();
  if (model.input_dim() != expected) {
    throw DimensionMismatch("fusion artifact: head width " + std::to_string(model.input_dim()) +
                            " does not match encoder+features width " + std::to_string(expected));
  }
  return model;
}

// ---- evaluation reports and traces ----

inline Json report_to_json(const EvalReport& report) {
  Json j;
  j["kind"] = "stancefusion.report";
  j["format_version"] = 1;
  Json cm = Json::array();
  for (const auto& row : report.cm.counts) {
    Json r = Json::array();
    for (std::int64_t c : row) r.push_back(c);
    cm.push_back(std::move(r));
  }
  j["confusion_matrix"] = std::move(cm);
  Json f1;
  for (Label l : kAllLabels) {
    f1[std::string(label_name(l))] = report.per_class_f1[static_cast<std::size_t>(label_index(l))];
  }
  j["per_class_f1"] = std::move(f1);
  j["macro_f1"] = report.macro_f1;
  j["accuracy"] = report.accuracy;
  Json exhibits = Json::array();
  for (const Exhibit& e : report.exhibits) {
    Json x;
    x["post_id"] = e.post_id;
    x["reply_text"] = e.reply_text;
    x["target_text"] = e.target_text;
    x["predicted"] = label_name(e.predicted);
    x["gold"] = label_name(e.gold);
    exhibits.push_back(std::move(x));
  }
  j["exhibits"] = std::move(exhibits);
  return j;
}

inline EvalReport report_from_json(const Json& j) {
  detail::expect_kind(j, "stancefusion.report");
  EvalReport report;
  const Json& cm = j.at("confusion_matrix");
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      report.cm.counts[g][p] = cm.at(g).at(p).get<std::int64_t>();
    }
  }
  for (Label l : kAllLabels) {
    report.per_class_f1[static_cast<std::size_t>(label_index(l))] =
        j.at("per_class_f1").at(std::string(label_name(l))).get<double>();
  }
  report.macro_f1 = j.at("macro_f1").get<double>();
  report.accuracy = j.at("accuracy").get<double>();
  for (const Json& x : j.at("exhibits")) {
    Exhibit e;
    e.post_id = x.at("post_id").get<std::string>();
    e.reply_text = x.at("reply_text").get<std::string>();
    e.target_text = x.at("target_text").get<std::string>();
    e.predicted = *parse_label(x.at("predicted").get<std::string>());
    e.gold = *parse_label(x.at("gold").get<std::string>());
    report.exhibits.push_back(std::move(e));
  }
  return report;
}

inline Json trace_to_json(const std::vector<EpochStats>& trace) {
  Json epochs = Json::array();
  for (const EpochStats& s : trace) {
    Json e;
    e["train_loss"] = s.train_loss;
    e["dev_loss"] = s.dev_loss;
    e["dev_macro_f1"] = s.dev_macro_f1;
    epochs.push_back(std::move(e));
  }
  Json j;
  j["kind"] = "stancefusion.trace";
  j["format_version"] = 1;
  j["epochs"] = std::move(epochs);
  return j;
}

// ---- file helpers ----

inline void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

inline Json read_json_artifact(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace stancefusion
