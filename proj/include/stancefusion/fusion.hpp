#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "stancefusion/encoder.hpp"
#include "stancefusion/error.hpp"
#include "stancefusion/eval.hpp"
#include "stancefusion/mlp.hpp"
#include "stancefusion/pca.hpp"
#include "stancefusion/tfidf.hpp"

namespace stancefusion {

/// What gets concatenated to the encoder's pooled output.
enum class FeatureSourceKind : int {
  none = 0,
  raw_tfidf = 1,
  pca_tfidf = 2,
  joint_mlp_output = 3,
  frozen_mlp_hidden = 4,
  frozen_mlp_output = 5,
};

constexpr std::string_view feature_source_name(FeatureSourceKind kind) {
  switch (kind) {
    case FeatureSourceKind::none: return "none";
    case FeatureSourceKind::raw_tfidf: return "raw_tfidf";
    case FeatureSourceKind::pca_tfidf: return "pca_tfidf";
    case FeatureSourceKind::joint_mlp_output: return "joint_mlp_output";
    case FeatureSourceKind::frozen_mlp_hidden: return "frozen_mlp_hidden";
    case FeatureSourceKind::frozen_mlp_output: return "frozen_mlp_output";
  }
  return "";
}

inline std::optional<FeatureSourceKind> parse_feature_source(std::string_view s) {
  for (FeatureSourceKind kind :
       {FeatureSourceKind::none, FeatureSourceKind::raw_tfidf, FeatureSourceKind::pca_tfidf,
        FeatureSourceKind::joint_mlp_output, FeatureSourceKind::frozen_mlp_hidden,
        FeatureSourceKind::frozen_mlp_output}) {
    if (s == feature_source_name(kind)) return kind;
  }
  return std::nullopt;
}

/// A feature-source variant together with the fitted sub-models it needs.
/// frozen_* variants hold an already-trained MLP whose parameters stay
/// untouched during ensemble training; the joint variant backpropagates
/// into its MLP.
struct FeatureSource {
  FeatureSourceKind kind = FeatureSourceKind::none;
  std::shared_ptr<const TfidfModel> tfidf;
  std::shared_ptr<const PcaModel> pca;
  std::shared_ptr<MlpModel> mlp;

  int feature_dim() const {
    switch (kind) {
      case FeatureSourceKind::none: return 0;
      case FeatureSourceKind::raw_tfidf: return require_tfidf().vocab_size();
      case FeatureSourceKind::pca_tfidf: return require_pca().output_dim();
      case FeatureSourceKind::joint_mlp_output:
      case FeatureSourceKind::frozen_mlp_output: {
        require_mlp();
        return static_cast<int>(kNumLabels);
      }
      case FeatureSourceKind::frozen_mlp_hidden: return require_mlp().hidden_dim();
    }
    return 0;
  }

  const TfidfModel& require_tfidf() const {
    const TfidfModel* model = tfidf.get();
    if (model == nullptr && mlp != nullptr) model = mlp->tfidf.get();
    if (model == nullptr) {
      throw MissingSubmodel(std::string(feature_source_name(kind)) + " needs a fitted TF-IDF model");
    }
    return *model;
  }

  const PcaModel& require_pca() const {
    if (pca == nullptr) {
      throw MissingSubmodel(std::string(feature_source_name(kind)) + " needs a fitted PCA model");
    }
    return *pca;
  }

  MlpModel& require_mlp() const {
    if (mlp == nullptr) {
      throw MissingSubmodel(std::string(feature_source_name(kind)) + " needs a trained MLP model");
    }
    return *mlp;
  }

  /// Whether ensemble training may update the MLP parameters.
  bool mlp_is_trainable() const { return kind == FeatureSourceKind::joint_mlp_output; }
};

inline FeatureSource no_features() { return FeatureSource{}; }

/// The feature-side vector for one pair. Length always equals
/// source.feature_dim().
inline Eigen::VectorXd feature_vector(const FeatureSource& source, const SequencePair& pair) {
  switch (source.kind) {
    case FeatureSourceKind::none: return Eigen::VectorXd(0);
    case FeatureSourceKind::raw_tfidf: return transform_tfidf(source.require_tfidf(), pair).dense();
    case FeatureSourceKind::pca_tfidf:
      return pca_project(source.require_pca(), transform_tfidf(source.require_tfidf(), pair));
    case FeatureSourceKind::frozen_mlp_hidden: {
      const MlpModel& mlp = source.require_mlp();
      return mlp_hidden(mlp, transform_tfidf(source.require_tfidf(), pair));
    }
    case FeatureSourceKind::joint_mlp_output:
    case FeatureSourceKind::frozen_mlp_output: {
      const MlpModel& mlp = source.require_mlp();
      return mlp_forward(mlp, transform_tfidf(source.require_tfidf(), pair)).probs;
    }
  }
  return Eigen::VectorXd(0);
}

/// Linear + softmax head over [pooled encoder output ⊕ feature vector];
/// the encoder part always comes first.
struct FusionModel {
  std::shared_ptr<EncoderBackend> encoder;
  MarkerSet markers;
  FeatureSource source;
  Eigen::MatrixXd w;  // (encoder dim + feature dim) x 4
  Eigen::Vector4d b = Eigen::Vector4d::Zero();

  int input_dim() const { return static_cast<int>(w.rows()); }
};

struct EnsembleHyperparams {
  int epochs = 6;
  double learning_rate = 2e-6;
  int batch_size = 4;
  std::uint64_t seed = 1;
  CostWeights cost_weights;
  bool freeze_mlp = true;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

namespace detail {

inline void check_fusion_width(const FusionModel& model) {
  if (model.encoder == nullptr) throw MissingSubmodel("fusion model has no encoder backend");
  const int expected = model.encoder->dim() + model.source.feature_dim();
  if (model.input_dim() != expected) {
    throw DimensionMismatch("fusion head expects input width " + std::to_string(expected) +
                            " (encoder " + std::to_string(model.encoder->dim()) + " + features " +
                            std::to_string(model.source.feature_dim()) + "), head has " +
                            std::to_string(model.input_dim()));
  }
}

}  // namespace detail

inline Eigen::Vector4d fusion_forward(const FusionModel& model, const SequencePair& pair,
                                      EmbeddingCache* cache = nullptr) {
  detail::check_fusion_width(model);
  Eigen::VectorXd z(model.input_dim());
  z.head(model.encoder->dim()) = encode_pair(*model.encoder, pair, model.markers, cache).values;
  z.tail(model.source.feature_dim()) = feature_vector(model.source, pair);
  return softmax(model.w.transpose() * z + model.b);
}

/// argmax prediction; ties break toward the lowest label index.
inline Label predict(const FusionModel& model, const SequencePair& pair,
                     EmbeddingCache* cache = nullptr) {
  return detail::argmax_label(fusion_forward(model, pair, cache));
}

struct FusionGradients {
  Eigen::MatrixXd w;
  Eigen::Vector4d b = Eigen::Vector4d::Zero();
  std::optional<MlpGradients> mlp;
  Eigen::VectorXd encoder;  // empty when the backend is frozen
};

/// Mean weighted cross-entropy over a batch with analytic gradients for the
/// head, optionally the MLP (joint variant) and the encoder parameters
/// (trainable backends). Trainers and gradient checks share this path.
inline double fusion_batch_loss_and_gradients(const FusionModel& model,
                                              const std::vector<const SequencePair*>& batch,
                                              const CostWeights& weights, bool update_mlp,
                                              bool update_encoder, FusionGradients* grads,
                                              EmbeddingCache* cache = nullptr) {
  detail::check_fusion_width(model);
  if (batch.empty()) throw EmptyInput("fusion_batch_loss_and_gradients on empty batch");
  const int enc_dim = model.encoder->dim();
  const int feat_dim = model.source.feature_dim();
  if (grads != nullptr) {
    grads->w = Eigen::MatrixXd::Zero(model.w.rows(), model.w.cols());
    grads->b.setZero();
    grads->mlp.reset();
    if (update_mlp && model.source.mlp != nullptr) {
      grads->mlp = MlpGradients::zeros_like(*model.source.mlp);
    }
    if (update_encoder && model.encoder->trainable()) {
      grads->encoder = Eigen::VectorXd::Zero(model.encoder->params().size());
    } else {
      grads->encoder.resize(0);
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const SequencePair* pair : batch) {
    if (!pair->label.has_value()) throw UnlabeledPost("pair " + pair->post_id + " has no label");
    const Label gold = *pair->label;

    const SequencePair bounded = truncate_pair(*pair, *model.encoder, model.encoder->max_tokens());
    const std::string rendered = render_encoder_input(bounded, model.markers);

    Eigen::VectorXd z(model.input_dim());
    if (cache != nullptr && !model.encoder->trainable()) {
      const std::string key = EmbeddingCache::make_key(model.encoder->name(), rendered);
      Eigen::VectorXd enc;
      if (!cache->lookup(key, &enc)) enc = cache->store(key, model.encoder->encode(rendered));
      z.head(enc_dim) = enc;
    } else {
      z.head(enc_dim) = model.encoder->encode(rendered);
    }

    // feature side, keeping the MLP activations when we must backprop
    SparseVec tfidf_vec;
    MlpActivations mlp_act;
    const bool joint = model.source.kind == FeatureSourceKind::joint_mlp_output;
    if (model.source.kind == FeatureSourceKind::none) {
      // nothing
    } else if (joint) {
      tfidf_vec = transform_tfidf(model.source.require_tfidf(), *pair);
      mlp_act = mlp_forward(model.source.require_mlp(), tfidf_vec);
      z.tail(feat_dim) = mlp_act.probs;
    } else {
      z.tail(feat_dim) = feature_vector(model.source, *pair);
    }

    const Eigen::Vector4d probs = softmax(model.w.transpose() * z + model.b);
    loss += weighted_cross_entropy(probs, gold, weights) * inv_n;
    if (grads == nullptr) continue;

    Eigen::Vector4d d_logits = probs;
    d_logits[label_index(gold)] -= 1.0;
    d_logits *= weights[gold] * inv_n;
    grads->b += d_logits;
    grads->w.noalias() += z * d_logits.transpose();

    const bool need_z_grad = (grads->encoder.size() > 0) || (grads->mlp.has_value() && joint);
    if (!need_z_grad) continue;
    const Eigen::VectorXd d_z = model.w * d_logits;

    if (grads->encoder.size() > 0) {
      grads->encoder += model.encoder->param_grad(rendered, d_z.head(enc_dim));
    }
    if (grads->mlp.has_value() && joint) {
      const MlpModel& mlp = model.source.require_mlp();
      const Eigen::Vector4d d_probs = d_z.tail(feat_dim);
      // softmax backward: d_u = (diag(q) - q qᵀ) d_q
      const Eigen::Vector4d& q = mlp_act.probs;
      const Eigen::Vector4d d_u = q.cwiseProduct(d_probs) - q * q.dot(d_probs);
      grads->mlp->b2 += d_u;
      grads->mlp->w2.noalias() += mlp_act.hidden * d_u.transpose();
      const Eigen::VectorXd d_hidden =
          (mlp.w2 * d_u).cwiseProduct((1.0 - mlp_act.hidden.array().square()).matrix());
      grads->mlp->b1 += d_hidden;
      for (const auto& [row, value] : tfidf_vec.entries) {
        grads->mlp->w1.row(row).noalias() += value * d_hidden.transpose();
      }
    }
  }
  return loss;
}

namespace detail {

/// Decoupled-weight-decay Adam over one flat parameter vector.
class AdamW {
 public:
  AdamW(Eigen::Index size, const EnsembleHyperparams& hp, Eigen::VectorXd decay_mask)
      : hp_(hp),
        m_(Eigen::VectorXd::Zero(size)),
        v_(Eigen::VectorXd::Zero(size)),
        decay_mask_(std::move(decay_mask)) {
    if (decay_mask_.size() == 0) decay_mask_ = Eigen::VectorXd::Ones(size);
  }

  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = hp_.adam_beta1 * m_ + (1.0 - hp_.adam_beta1) * grad;
    v_ = hp_.adam_beta2 * v_ + (1.0 - hp_.adam_beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(hp_.adam_beta1, t_);
    const double bc2 = 1.0 - std::pow(hp_.adam_beta2, t_);
    const Eigen::ArrayXd m_hat = m_.array() / bc1;
    const Eigen::ArrayXd v_hat = v_.array() / bc2;
    params.array() -= hp_.learning_rate *
                      (m_hat / (v_hat.sqrt() + hp_.adam_eps) +
                       hp_.weight_decay * decay_mask_.array() * params.array());
  }

 private:
  EnsembleHyperparams hp_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  Eigen::VectorXd decay_mask_;
  int t_ = 0;
};

}  // namespace detail

struct EnsembleTrainResult {
  FusionModel model;
  std::vector<EpochStats> trace;
};

inline double fusion_mean_loss(const FusionModel& model, const std::vector<SequencePair>& pairs,
                               const CostWeights& weights, EmbeddingCache* cache = nullptr) {
  if (pairs.empty()) return 0.0;
  double loss = 0.0;
  for (const SequencePair& p : pairs) {
    if (!p.label.has_value()) throw UnlabeledPost("pair " + p.post_id + " has no label");
    loss += weighted_cross_entropy(fusion_forward(model, p, cache), *p.label, weights);
  }
  return loss / static_cast<double>(pairs.size());
}

/// Trains the fusion head (and, depending on the variant, the MLP and the
/// encoder) with AdamW under cost-weighted cross-entropy. Deterministic per
/// seed for the toy backends; the result does not depend on the order the
/// pairs are passed in. With freeze_mlp the MLP parameters are bit-identical
/// before and after.
inline EnsembleTrainResult train_ensemble(const std::vector<SequencePair>& train,
                                          const std::vector<SequencePair>& dev,
                                          std::shared_ptr<EncoderBackend> encoder,
                                          FeatureSource source, const EnsembleHyperparams& hp,
                                          const MarkerSet& markers = {},
                                          EmbeddingCache* cache = nullptr) {
  if (train.empty()) throw EmptyCorpus("train_ensemble on empty training set");
  if (encoder == nullptr) throw MissingSubmodel("train_ensemble needs an encoder backend");

  FusionModel model;
  model.encoder = std::move(encoder);
  model.markers = markers;
  model.source = std::move(source);

  Rng rng(hp.seed);
  const int width = model.encoder->dim() + model.source.feature_dim();
  model.w = detail::glorot_uniform(width, static_cast<Eigen::Index>(kNumLabels), rng);
  model.b.setZero();

  const bool update_mlp = model.source.mlp_is_trainable() && !hp.freeze_mlp;
  const bool update_encoder = model.encoder->trainable();
  EmbeddingCache* train_cache = update_encoder ? nullptr : cache;

  // canonical example order; the seeded shuffle owns all ordering
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const SequencePair& pa = train[a];
    const SequencePair& pb = train[b];
    return std::tie(pa.post_id, pa.first, pa.second, pa.label) <
           std::tie(pb.post_id, pb.first, pb.second, pb.label);
  });

  detail::AdamW head_w_opt(model.w.size(), hp, {});
  detail::AdamW head_b_opt(4, hp, Eigen::VectorXd::Zero(4));
  std::optional<detail::AdamW> mlp_opt;
  if (update_mlp) {
    mlp_opt.emplace(detail::flatten_mlp_params(*model.source.mlp).size(), hp,
                    detail::mlp_decay_mask(*model.source.mlp));
  }
  std::optional<detail::AdamW> encoder_opt;
  if (update_encoder) {
    encoder_opt.emplace(model.encoder->params().size(), hp, model.encoder->param_decay_mask());
  }

  FusionGradients grads;
  EnsembleTrainResult result;
  result.trace.reserve(static_cast<std::size_t>(hp.epochs));
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.batch_size)) {
      std::vector<const SequencePair*> batch;
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&train[order[i]]);
      const double loss = fusion_batch_loss_and_gradients(model, batch, hp.cost_weights,
                                                          update_mlp, update_encoder, &grads,
                                                          train_cache);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("train_ensemble: non-finite loss at epoch " + std::to_string(epoch) +
                            " (seed " + std::to_string(hp.seed) + ", lr " +
                            std::to_string(hp.learning_rate) + ")");
      }
      {
        Eigen::Map<Eigen::VectorXd> w_flat(model.w.data(), model.w.size());
        Eigen::Map<const Eigen::VectorXd> g_flat(grads.w.data(), grads.w.size());
        head_w_opt.step(w_flat, g_flat);
      }
      {
        Eigen::VectorXd b = model.b;
        head_b_opt.step(b, grads.b);
        model.b = b;
      }
      if (update_mlp && grads.mlp.has_value()) {
        Eigen::VectorXd params = detail::flatten_mlp_params(*model.source.mlp);
        mlp_opt->step(params, detail::flatten_mlp(*grads.mlp));
        detail::unflatten_mlp_params(params, *model.source.mlp);
      }
      if (update_encoder && grads.encoder.size() > 0) {
        Eigen::VectorXd params = model.encoder->params();
        encoder_opt->step(params, grads.encoder);
        model.encoder->set_params(params);
      }
    }

    EpochStats stats;
    stats.train_loss = fusion_mean_loss(model, train, hp.cost_weights, train_cache);
    if (!dev.empty()) {
      stats.dev_loss = fusion_mean_loss(model, dev, hp.cost_weights, train_cache);
      std::vector<Label> preds;
      std::vector<Label> golds;
      preds.reserve(dev.size());
      for (const SequencePair& p : dev) {
        preds.push_back(predict(model, p, train_cache));
        golds.push_back(*p.label);
      }
      stats.dev_macro_f1 = scores(confusion_matrix(preds, golds)).macro_f1;
    }
    result.trace.push_back(stats);
  }
  result.model = std::move(model);
  return result;
}

/// Evaluation report for a trained fusion model over labeled pairs, with up
/// to k misclassification exhibits per (gold, predicted) cell.
inline EvalReport error_report(const FusionModel& model, const std::vector<SequencePair>& pairs,
                               int k, EmbeddingCache* cache = nullptr) {
  std::vector<Label> preds;
  preds.reserve(pairs.size());
  for (const SequencePair& p : pairs) preds.push_back(predict(model, p, cache));
  return make_eval_report(preds, pairs, k);
}

}  // namespace stancefusion
