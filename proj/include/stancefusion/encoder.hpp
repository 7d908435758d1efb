#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "stancefusion/embedding_cache.hpp"
#include "stancefusion/error.hpp"
#include "stancefusion/hashing.hpp"
#include "stancefusion/textprep.hpp"

namespace stancefusion {

/// A sentence-pair encoder producing one pooled vector of fixed width per
/// rendered input. Frozen backends are pure functions of the input string;
/// trainable backends additionally expose a flat parameter vector and a
/// backward pass so ensemble training can fine-tune them.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  int max_tokens() const { return max_tokens_; }
  virtual bool trainable() const { return false; }

  Eigen::VectorXd encode(const std::string& rendered) const {
    ++encode_calls_;
    Eigen::VectorXd out = encode_impl(rendered);
    if (out.size() != dim_) {
      throw DimensionMismatch("backend " + name_ + " produced " + std::to_string(out.size()) +
                              " dims, declared " + std::to_string(dim_));
    }
    return out;
  }

  /// Number of encode() invocations, cache hits excluded.
  std::size_t encode_calls() const { return encode_calls_; }
  void reset_encode_calls() { encode_calls_ = 0; }

  /// Token segmentation used for the truncation budget. Whitespace splitting
  /// by default; real adapters substitute their own subword tokenizer.
  virtual std::vector<std::string> tokenize(const std::string& text) const {
    std::vector<std::string> tokens;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) tokens.push_back(std::move(tok));
    return tokens;
  }

  // Trainable-parameter surface; frozen backends keep these empty.
  virtual Eigen::VectorXd params() const { return {}; }
  virtual void set_params(const Eigen::VectorXd&) {}
  /// 1 for parameters subject to weight decay, 0 for bias-like ones.
  virtual Eigen::VectorXd param_decay_mask() const { return {}; }
  /// dLoss/dparams given dLoss/doutput for one input.
  virtual Eigen::VectorXd param_grad(const std::string& /*rendered*/,
                                     const Eigen::VectorXd& /*grad_out*/) const {
    return {};
  }

 protected:
  EncoderBackend(std::string name, int dim, int max_tokens)
      : name_(std::move(name)), dim_(dim), max_tokens_(max_tokens) {}

  virtual Eigen::VectorXd encode_impl(const std::string& rendered) const = 0;

 private:
  std::string name_;
  int dim_;
  int max_tokens_;
  mutable std::size_t encode_calls_ = 0;
};

/// Deterministic stand-in for a pre-trained encoder: every whitespace token
/// of the rendered string seeds a pseudo-random unit vector (seed = stable
/// 64-bit hash of the token), the pooled output is the tanh-squashed mean
/// of those vectors. Identical on every platform, sensitive to any content
/// change, and cheap enough to drive the full pipeline in tests.
class ToyEncoder : public EncoderBackend {
 public:
  explicit ToyEncoder(int dim = 16, int max_tokens = 512, std::string name = "toy")
      : EncoderBackend(std::move(name), dim, max_tokens) {}

 protected:
  Eigen::VectorXd encode_impl(const std::string& rendered) const override {
    return pooled_mean(rendered).array().tanh().matrix();
  }

  Eigen::VectorXd pooled_mean(const std::string& rendered) const {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim());
    const std::vector<std::string> tokens = tokenize(rendered);
    for (const std::string& tok : tokens) {
      sum += token_vector(tok);
    }
    if (!tokens.empty()) sum /= static_cast<double>(tokens.size());
    return sum;
  }

  Eigen::VectorXd token_vector(const std::string& token) const {
    std::uint64_t state = fnv1a64(token);
    Eigen::VectorXd v(dim());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v[i] = 2.0 * (static_cast<double>(splitmix64_next(state) >> 11) * 0x1.0p-53) - 1.0;
    }
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    return v;
  }
};

/// Toy encoder with a trainable affine head on top of the frozen token
/// pooling: output = tanh(A * mean + c). Initialized at the identity so an
/// untrained instance matches ToyEncoder; exists to exercise the
/// fine-tuning path (gradients through the encoder) without pre-trained
/// weights.
class TrainableToyEncoder : public ToyEncoder {
 public:
  explicit TrainableToyEncoder(int dim = 16, int max_tokens = 512)
      : ToyEncoder(dim, max_tokens, "toy-trainable"),
        head_(Eigen::MatrixXd::Identity(dim, dim)),
        bias_(Eigen::VectorXd::Zero(dim)) {}

  bool trainable() const override { return true; }

  Eigen::VectorXd params() const override {
    Eigen::VectorXd flat(head_.size() + bias_.size());
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < head_.rows(); ++r) {
      for (Eigen::Index c = 0; c < head_.cols(); ++c) flat[at++] = head_(r, c);
    }
    flat.tail(bias_.size()) = bias_;
    return flat;
  }

  void set_params(const Eigen::VectorXd& flat) override {
    if (flat.size() != head_.size() + bias_.size()) {
      throw DimensionMismatch("TrainableToyEncoder: bad parameter vector length");
    }
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < head_.rows(); ++r) {
      for (Eigen::Index c = 0; c < head_.cols(); ++c) head_(r, c) = flat[at++];
    }
    bias_ = flat.tail(bias_.size());
  }

  Eigen::VectorXd param_decay_mask() const override {
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(head_.size() + bias_.size());
    mask.tail(bias_.size()).setZero();
    return mask;
  }

  Eigen::VectorXd param_grad(const std::string& rendered,
                             const Eigen::VectorXd& grad_out) const override {
    const Eigen::VectorXd mean = pooled_mean(rendered);
    const Eigen::VectorXd out = ((head_ * mean + bias_).array().tanh()).matrix();
    const Eigen::VectorXd d_pre =
        grad_out.cwiseProduct((1.0 - out.array().square()).matrix());
    Eigen::VectorXd grad(head_.size() + bias_.size());
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < head_.rows(); ++r) {
      for (Eigen::Index c = 0; c < head_.cols(); ++c) grad[at++] = d_pre[r] * mean[c];
    }
    grad.tail(bias_.size()) = d_pre;
    return grad;
  }

 protected:
  Eigen::VectorXd encode_impl(const std::string& rendered) const override {
    return ((head_ * pooled_mean(rendered) + bias_).array().tanh()).matrix();
  }

 private:
  Eigen::MatrixXd head_;
  Eigen::VectorXd bias_;
};

/// Adapter stub for real pre-trained encoders. It declares the backend's
/// pooled width and pooling mode and serves vectors from an embedding cache
/// when one is attached (frozen mode, fed by an external encoder run);
/// encoding anything not in the cache raises BackendUnavailable, since no
/// pre-trained runtime is bundled with this library.
class PretrainedEncoderAdapter : public EncoderBackend {
 public:
  PretrainedEncoderAdapter(std::string name, int dim, int max_tokens = 512,
                           std::string pooling = "pooler",
                           std::shared_ptr<EmbeddingCache> cache = nullptr)
      : EncoderBackend(std::move(name), dim, max_tokens),
        pooling_(std::move(pooling)),
        cache_(std::move(cache)) {}

  const std::string& pooling() const { return pooling_; }

 protected:
  Eigen::VectorXd encode_impl(const std::string& rendered) const override {
    if (cache_ != nullptr) {
      Eigen::VectorXd out;
      if (cache_->lookup(EmbeddingCache::make_key(name(), rendered), &out)) return out;
    }
    throw BackendUnavailable("backend '" + name() +
                             "' has no runtime; precompute embeddings into a cache to use it");
  }

 private:
  std::string pooling_;
  std::shared_ptr<EmbeddingCache> cache_;
};

/// Pooled widths of the known pre-trained backends.
inline int known_encoder_dim(const std::string& name) {
  if (name == "roberta-base" || name == "bert-base" || name == "bert-base-uncased") return 768;
  if (name == "roberta-large" || name == "bert-large" || name == "bert-large-uncased") return 1024;
  return 0;
}

struct EncoderConfig {
  std::string name = "toy";
  int dim = 0;  // 0 = backend default
  int max_tokens = 512;
  bool trainable = false;
  std::string pooling = "pooler";  // or "cls"
  std::string cache_path;
};

inline std::shared_ptr<EncoderBackend> make_encoder(const EncoderConfig& cfg,
                                                    std::shared_ptr<EmbeddingCache> cache = nullptr) {
  if (cfg.name == "toy" || cfg.name == "toy-trainable") {
    const int dim = cfg.dim > 0 ? cfg.dim : 16;
    if (cfg.name == "toy-trainable" || cfg.trainable) {
      return std::make_shared<TrainableToyEncoder>(dim, cfg.max_tokens);
    }
    return std::make_shared<ToyEncoder>(dim, cfg.max_tokens);
  }
  int dim = cfg.dim > 0 ? cfg.dim : known_encoder_dim(cfg.name);
  if (dim <= 0) {
    throw ConfigError("unknown encoder '" + cfg.name + "' and no explicit dim given");
  }
  return std::make_shared<PretrainedEncoderAdapter>(cfg.name, dim, cfg.max_tokens, cfg.pooling,
                                                    std::move(cache));
}

/// Pooled encoder output for one input pair.
struct PooledVector {
  Eigen::VectorXd values;
  std::string post_id;
};

/// Drops tokens until the pair fits max_tokens, marker tokens included:
/// from the end of `second` first, then from the end of `first`, which is
/// never reduced below one token.
inline SequencePair truncate_pair(const SequencePair& pair, const EncoderBackend& backend,
                                  int max_tokens) {
  constexpr int kMarkerTokens = 4;  // start + doubled sep + end
  std::vector<std::string> first = backend.tokenize(pair.first);
  std::vector<std::string> second = backend.tokenize(pair.second);
  const std::size_t orig_first = first.size();
  const std::size_t orig_second = second.size();
  const int budget = std::max(1, max_tokens - kMarkerTokens);
  auto total = [&] { return static_cast<int>(first.size() + second.size()); };
  while (total() > budget && !second.empty()) second.pop_back();
  while (total() > budget && first.size() > 1) first.pop_back();
  if (first.size() == orig_first && second.size() == orig_second) {
    return pair;  // fit without edits
  }
  auto join = [](const std::vector<std::string>& tokens) {
    std::string out;
    for (const std::string& t : tokens) {
      if (!out.empty()) out += ' ';
      out += t;
    }
    return out;
  };
  SequencePair truncated = pair;
  truncated.first = join(first);
  truncated.second = join(second);
  return truncated;
}

/// Truncates, renders, and encodes one pair. When a cache is supplied the
/// encoder is only invoked on cache misses, and stored vectors are
/// float32-quantized so hits and misses return identical values. Trainable
/// backends bypass the cache: their output depends on parameters the cache
/// key cannot see.
inline PooledVector encode_pair(const EncoderBackend& backend, const SequencePair& pair,
                                const MarkerSet& markers = {}, EmbeddingCache* cache = nullptr) {
  const SequencePair bounded = truncate_pair(pair, backend, backend.max_tokens());
  const std::string rendered = render_encoder_input(bounded, markers);
  PooledVector out;
  out.post_id = pair.post_id;
  if (cache != nullptr && !backend.trainable()) {
    const std::string key = EmbeddingCache::make_key(backend.name(), rendered);
    if (cache->lookup(key, &out.values)) return out;
    out.values = cache->store(key, backend.encode(rendered));
    return out;
  }
  out.values = backend.encode(rendered);
  return out;
}

/// Order-preserving batch encode with optional caching.
inline std::vector<PooledVector> batch_encode(const EncoderBackend& backend,
                                              const std::vector<SequencePair>& pairs,
                                              const MarkerSet& markers = {},
                                              EmbeddingCache* cache = nullptr) {
  std::vector<PooledVector> out;
  out.reserve(pairs.size());
  for (const SequencePair& pair : pairs) out.push_back(encode_pair(backend, pair, markers, cache));
  return out;
}

}  // namespace stancefusion
