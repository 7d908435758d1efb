#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "stancefusion/error.hpp"
#include "stancefusion/eval.hpp"
#include "stancefusion/hashing.hpp"
#include "stancefusion/label.hpp"
#include "stancefusion/tfidf.hpp"

namespace stancefusion {

/// Per-class loss weights, indexed in canonical label order. All entries
/// are positive.
struct CostWeights {
  Eigen::Vector4d w = Eigen::Vector4d::Ones();

  double operator[](Label l) const { return w[label_index(l)]; }
};

/// Inverse-frequency weights normalized to mean 1: w[c] = (1/fraction[c]) /
/// mean over classes.
inline CostWeights default_cost_weights(const std::array<double, kNumLabels>& distribution) {
  Eigen::Vector4d raw;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (!(distribution[c] > 0.0)) {
      throw ZeroFraction("class " +
                         std::string(label_display_name(label_from_index(static_cast<int>(c)))) +
                         " has zero fraction");
    }
    raw[static_cast<Eigen::Index>(c)] = 1.0 / distribution[c];
  }
  CostWeights weights;
  weights.w = raw / raw.mean();
  return weights;
}

/// Numerically stable softmax (row max subtracted before exponentiation).
inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::ArrayXd shifted = (logits.array() - logits.maxCoeff()).exp();
  return (shifted / shifted.sum()).matrix();
}

inline constexpr double kProbFloor = 1e-12;

/// Cost-weighted cross-entropy for one example:
/// loss = -w[gold] * ln(probs[gold]), with the probability clamped at
/// 1e-12 so the log never blows up. Batch losses are means of these.
inline double weighted_cross_entropy(const Eigen::Vector4d& probs, Label gold,
                                     const CostWeights& weights) {
  const double p = std::max(probs[label_index(gold)], kProbFloor);
  return -weights[gold] * std::log(p);
}

struct MlpHyperparams {
  double learning_rate = 0.02;
  int epochs = 55;
  int hidden_units = 128;
  int batch_size = 32;
  std::uint64_t seed = 1;
  CostWeights cost_weights;
};

/// Single-hidden-layer feature model: hidden = tanh(xᵀW1 + b1), probs =
/// softmax(hiddenᵀW2 + b2). Exposes both the class probabilities and the
/// 128-dim hidden activation, which downstream fusion consumes.
struct MlpModel {
  Eigen::MatrixXd w1;  // |V| x H
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd w2;  // H x 4
  Eigen::Vector4d b2;
  std::shared_ptr<const TfidfModel> tfidf;  // vectorizer the model was trained with

  int input_dim() const { return static_cast<int>(w1.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }
};

struct LabeledVector {
  SparseVec x;
  Label label = Label::support;
};

struct MlpActivations {
  Eigen::VectorXd hidden;
  Eigen::Vector4d probs;
};

namespace detail {

inline Eigen::VectorXd sparse_times_matrix(const SparseVec& x, const Eigen::MatrixXd& m) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m.cols());
  for (const auto& [row, value] : x.entries) out.noalias() += value * m.row(row).transpose();
  return out;
}

}  // namespace detail

inline MlpActivations mlp_forward(const MlpModel& model, const SparseVec& x) {
  if (x.dim != model.input_dim()) {
    throw DimensionMismatch("mlp_forward: input dim " + std::to_string(x.dim) + " vs model " +
                            std::to_string(model.input_dim()));
  }
  MlpActivations act;
  act.hidden = (detail::sparse_times_matrix(x, model.w1) + model.b1).array().tanh().matrix();
  act.probs = softmax(model.w2.transpose() * act.hidden + model.b2);
  return act;
}

/// The fusion feature source: the hidden activation alone.
inline Eigen::VectorXd mlp_hidden(const MlpModel& model, const SparseVec& x) {
  return mlp_forward(model, x).hidden;
}

struct MlpGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::Vector4d b2;

  static MlpGradients zeros_like(const MlpModel& m) {
    return MlpGradients{Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols()),
                        Eigen::VectorXd::Zero(m.b1.size()),
                        Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols()),
                        Eigen::Vector4d::Zero()};
  }
};

/// Mean weighted cross-entropy over a batch plus analytic gradients of all
/// four parameter blocks. This is the exact function the trainer steps on,
/// so the finite-difference checks exercise the production path.
inline double mlp_batch_loss_and_gradients(const MlpModel& model,
                                           const std::vector<const LabeledVector*>& batch,
                                           const CostWeights& weights, MlpGradients* grads) {
  if (batch.empty()) throw EmptyInput("mlp_batch_loss_and_gradients on empty batch");
  if (grads != nullptr) *grads = MlpGradients::zeros_like(model);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const LabeledVector* ex : batch) {
    const MlpActivations act = mlp_forward(model, ex->x);
    loss += weighted_cross_entropy(act.probs, ex->label, weights) * inv_n;
    if (grads == nullptr) continue;
    Eigen::Vector4d d_logits = act.probs;
    d_logits[label_index(ex->label)] -= 1.0;
    d_logits *= weights[ex->label] * inv_n;
    grads->b2 += d_logits;
    grads->w2.noalias() += act.hidden * d_logits.transpose();
    Eigen::VectorXd d_hidden =
        (model.w2 * d_logits).cwiseProduct((1.0 - act.hidden.array().square()).matrix());
    grads->b1 += d_hidden;
    for (const auto& [row, value] : ex->x.entries) {
      grads->w1.row(row).noalias() += value * d_hidden.transpose();
    }
  }
  return loss;
}

namespace detail {

// flat parameter-vector view in the fixed block order w1 | b1 | w2 | b2,
// shared by the joint-ensemble optimizer and the gradient checks
inline Eigen::VectorXd flatten_mlp_blocks(const Eigen::MatrixXd& w1, const Eigen::VectorXd& b1,
                                          const Eigen::MatrixXd& w2, const Eigen::Vector4d& b2) {
  Eigen::VectorXd flat(w1.size() + b1.size() + w2.size() + b2.size());
  Eigen::Index at = 0;
  flat.segment(at, w1.size()) = Eigen::Map<const Eigen::VectorXd>(w1.data(), w1.size());
  at += w1.size();
  flat.segment(at, b1.size()) = b1;
  at += b1.size();
  flat.segment(at, w2.size()) = Eigen::Map<const Eigen::VectorXd>(w2.data(), w2.size());
  at += w2.size();
  flat.segment(at, 4) = b2;
  return flat;
}

inline Eigen::VectorXd flatten_mlp(const MlpGradients& g) {
  return flatten_mlp_blocks(g.w1, g.b1, g.w2, g.b2);
}

inline Eigen::VectorXd flatten_mlp_params(const MlpModel& m) {
  return flatten_mlp_blocks(m.w1, m.b1, m.w2, m.b2);
}

inline void unflatten_mlp_params(const Eigen::VectorXd& flat, MlpModel& m) {
  Eigen::Index at = 0;
  Eigen::Map<Eigen::VectorXd>(m.w1.data(), m.w1.size()) = flat.segment(at, m.w1.size());
  at += m.w1.size();
  m.b1 = flat.segment(at, m.b1.size());
  at += m.b1.size();
  Eigen::Map<Eigen::VectorXd>(m.w2.data(), m.w2.size()) = flat.segment(at, m.w2.size());
  at += m.w2.size();
  m.b2 = flat.segment(at, 4);
}

inline Eigen::VectorXd mlp_decay_mask(const MlpModel& m) {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(m.w1.size() + m.b1.size() + m.w2.size() + 4);
  mask.segment(m.w1.size(), m.b1.size()).setZero();
  mask.tail(4).setZero();
  return mask;
}

}  // namespace detail

inline double mlp_mean_loss(const MlpModel& model, const std::vector<LabeledVector>& examples,
                            const CostWeights& weights) {
  double loss = 0.0;
  for (const LabeledVector& ex : examples) {
    loss += weighted_cross_entropy(mlp_forward(model, ex.x).probs, ex.label, weights);
  }
  return examples.empty() ? 0.0 : loss / static_cast<double>(examples.size());
}

struct EpochStats {
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_macro_f1 = 0.0;
};

struct MlpTrainResult {
  MlpModel model;
  std::vector<EpochStats> trace;
};

namespace detail {

inline Eigen::MatrixXd glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

// Canonical example order, independent of the order the caller supplied:
// the seeded shuffle owns all ordering randomness.
inline std::vector<std::size_t> canonical_order(const std::vector<LabeledVector>& examples) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const LabeledVector& ea = examples[a];
    const LabeledVector& eb = examples[b];
    if (ea.label != eb.label) return ea.label < eb.label;
    return ea.x.entries < eb.x.entries;
  });
  return order;
}

inline Label argmax_label(const Eigen::Vector4d& probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(kNumLabels); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return label_from_index(best);
}

}  // namespace detail

inline Label mlp_predict(const MlpModel& model, const SparseVec& x) {
  return detail::argmax_label(mlp_forward(model, x).probs);
}

namespace detail {

inline MlpModel init_mlp(int input_dim, int hidden_units, Rng& rng,
                         std::shared_ptr<const TfidfModel> tfidf) {
  MlpModel model;
  model.w1 = glorot_uniform(input_dim, hidden_units, rng);
  model.b1 = Eigen::VectorXd::Zero(hidden_units);
  model.w2 = glorot_uniform(hidden_units, static_cast<Eigen::Index>(kNumLabels), rng);
  model.b2 = Eigen::Vector4d::Zero();
  model.tfidf = std::move(tfidf);
  return model;
}

}  // namespace detail

/// Untrained model with seeded Glorot-uniform weights and zero biases.
inline MlpModel init_mlp(int input_dim, int hidden_units, std::uint64_t seed,
                         std::shared_ptr<const TfidfModel> tfidf = nullptr) {
  Rng rng(seed);
  return detail::init_mlp(input_dim, hidden_units, rng, std::move(tfidf));
}

/// Trains the MLP with plain mini-batch SGD for hp.epochs epochs and
/// returns the final-epoch model together with a per-epoch trace of train
/// loss and dev metrics. Deterministic given hp.seed; the result does not
/// depend on the order examples are passed in.
inline MlpTrainResult train_mlp(const std::vector<LabeledVector>& train,
                                const std::vector<LabeledVector>& dev, const MlpHyperparams& hp,
                                std::shared_ptr<const TfidfModel> tfidf = nullptr) {
  if (train.empty()) throw EmptyCorpus("train_mlp on empty training set");
  std::array<bool, kNumLabels> present{};
  for (const LabeledVector& ex : train) present[label_index(ex.label)] = true;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (!present[c]) {
      throw MissingClass("class " +
                         std::string(label_display_name(label_from_index(static_cast<int>(c)))) +
                         " absent from training set");
    }
  }
  const int input_dim = train.front().x.dim;

  Rng rng(hp.seed);
  MlpModel model = detail::init_mlp(input_dim, hp.hidden_units, rng, std::move(tfidf));

  std::vector<std::size_t> order = detail::canonical_order(train);
  MlpGradients grads = MlpGradients::zeros_like(model);
  MlpTrainResult result;
  result.trace.reserve(static_cast<std::size_t>(hp.epochs));

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      std::vector<const LabeledVector*> batch;
      const std::size_t stop = std::min(order.size(), start + hp.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&train[order[i]]);
      const double loss = mlp_batch_loss_and_gradients(model, batch, hp.cost_weights, &grads);
      if (!std::isfinite(loss)) {
        throw NonFiniteLoss("train_mlp: non-finite loss at epoch " + std::to_string(epoch));
      }
      model.w1.noalias() -= hp.learning_rate * grads.w1;
      model.b1.noalias() -= hp.learning_rate * grads.b1;
      model.w2.noalias() -= hp.learning_rate * grads.w2;
      model.b2.noalias() -= hp.learning_rate * grads.b2;
    }

    EpochStats stats;
    stats.train_loss = mlp_mean_loss(model, train, hp.cost_weights);
    if (!dev.empty()) {
      stats.dev_loss = mlp_mean_loss(model, dev, hp.cost_weights);
      std::vector<Label> preds;
      std::vector<Label> golds;
      preds.reserve(dev.size());
      for (const LabeledVector& ex : dev) {
        preds.push_back(mlp_predict(model, ex.x));
        golds.push_back(ex.label);
      }
      stats.dev_macro_f1 = scores(confusion_matrix(preds, golds)).macro_f1;
    }
    result.trace.push_back(stats);
  }
  result.model = std::move(model);
  return result;
}

/// Stable fingerprint of the parameter blocks, used to verify freezing.
inline std::uint64_t mlp_param_checksum(const MlpModel& model) {
  std::string bytes;
  auto append = [&bytes](const double* data, std::size_t n) {
    bytes.append(reinterpret_cast<const char*>(data), n * sizeof(double));
  };
  append(model.w1.data(), static_cast<std::size_t>(model.w1.size()));
  append(model.b1.data(), static_cast<std::size_t>(model.b1.size()));
  append(model.w2.data(), static_cast<std::size_t>(model.w2.size()));
  append(model.b2.data(), static_cast<std::size_t>(model.b2.size()));
  return fnv1a64(bytes);
}

}  // namespace stancefusion
