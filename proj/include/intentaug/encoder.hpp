#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intentaug/augment.hpp"
#include "intentaug/tensor.hpp"

namespace intentaug {

struct EncoderConfig {
  int vocab_size = 0;
  int hidden_size = 32;
  int num_layers = 2;
  int num_attention_heads = 2;
  int intermediate_size = 128;
  int max_sequence_length = 64;
  int type_vocab_size = 2;
  double dropout = 0.1;
  double attention_dropout = 0.1;
  double layer_norm_eps = 1e-12;
  double initializer_range = 0.02;  // stddev of the normal weight init
  bool pooler = true;
  // Directory produced by tools/convert_bert_checkpoint.py; empty for a
  // randomly initialized encoder.
  std::string pretrained;

  // Throws ConfigError on an inconsistent configuration.
  void validate() const;
};

// Per-sequence encoder output: one row of hidden state per subword and the
// pooled classification vector taken from position 0.
template <typename Scalar>
struct EncoderOutput {
  Matrix<Scalar> hidden_states;  // [seq_len x hidden]
  RowVector<Scalar> pooled;      // [hidden]
};

// Batch output, padded to a common sequence length.
template <typename Scalar>
struct EncoderBatchOutput {
  std::vector<Matrix<Scalar>> hidden_states;  // batch x [seq_len x hidden]
  Matrix<Scalar> pooled;                      // [batch x hidden]
  std::vector<std::vector<bool>> valid;       // false at padding positions

  Eigen::Index batch_size() const { return static_cast<Eigen::Index>(hidden_states.size()); }
  Eigen::Index sequence_length() const { return hidden_states.empty() ? 0 : hidden_states.front().rows(); }
  Eigen::Index hidden_size() const { return pooled.cols(); }
};

enum class Mode { eval, train };

// BERT-architecture encoder (post-LN blocks, GELU feed-forward, tanh pooler)
// with a hand-written backward pass. Used both as the small trainable model
// and as the runtime for converted pretrained checkpoints.
template <typename Scalar>
class TransformerEncoder {
 public:
  struct LayerCache {
    Matrix<Scalar> input, q, k, v, context;
    std::vector<Matrix<Scalar>> probs, attn_dropout;
    Matrix<Scalar> attn_out_dropout;
    typename LayerNorm<Scalar>::Cache ln_attn;
    Matrix<Scalar> after_attn, inter_pre, inter_act;
    Matrix<Scalar> ffn_dropout;
    typename LayerNorm<Scalar>::Cache ln_out;
  };

  struct Cache {
    std::vector<int> ids;
    typename LayerNorm<Scalar>::Cache ln_embed;
    Matrix<Scalar> embed_dropout;
    std::vector<LayerCache> layers;
    Matrix<Scalar> hidden;
    RowVector<Scalar> pooled;
    bool train = false;
  };

  TransformerEncoder() = default;
  explicit TransformerEncoder(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  int hidden_size() const { return config_.hidden_size; }

  // Normal(0, initializer_range) weights, zero biases, unit LayerNorm gains.
  void init(Rng& rng);

  // `valid` marks attendable key positions (empty = all). `rng` is only used
  // in train mode; `cache` is required for a later backward().
  EncoderOutput<Scalar> forward(std::span<const int> ids, std::span<const bool> valid, Mode mode, Rng* rng,
                                Cache* cache) const;

  // Accumulates parameter gradients given dL/d(hidden_states) and dL/d(pooled).
  void backward(const Cache& cache, const Matrix<Scalar>& d_hidden, const RowVector<Scalar>& d_pooled);

  // Pads every encoding to the longest one and runs the eval-mode forward.
  EncoderBatchOutput<Scalar> encode(std::span<const AlignedEncoding> batch) const;

  template <typename Fn>
  void visit(Fn&& fn) {
    fn(std::string("embeddings.word_embeddings.weight"), word_embeddings_);
    fn(std::string("embeddings.position_embeddings.weight"), position_embeddings_);
    fn(std::string("embeddings.token_type_embeddings.weight"), token_type_embeddings_);
    embed_norm_.visit("embeddings.LayerNorm", fn);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string prefix = "encoder.layer." + std::to_string(i);
      auto& layer = layers_[i];
      layer.query.visit(prefix + ".attention.self.query", fn);
      layer.key.visit(prefix + ".attention.self.key", fn);
      layer.value.visit(prefix + ".attention.self.value", fn);
      layer.attn_output.visit(prefix + ".attention.output.dense", fn);
      layer.attn_norm.visit(prefix + ".attention.output.LayerNorm", fn);
      layer.intermediate.visit(prefix + ".intermediate.dense", fn);
      layer.output.visit(prefix + ".output.dense", fn);
      layer.out_norm.visit(prefix + ".output.LayerNorm", fn);
    }
    if (config_.pooler) pooler_.visit("pooler.dense", fn);
  }

 private:
  struct Layer {
    Linear<Scalar> query, key, value, attn_output;
    LayerNorm<Scalar> attn_norm;
    Linear<Scalar> intermediate, output;
    LayerNorm<Scalar> out_norm;
  };

  Matrix<Scalar> layer_forward(const Layer& layer, const Matrix<Scalar>& x, std::span<const bool> valid, bool train,
                               Rng* rng, LayerCache* cache) const;
  Matrix<Scalar> layer_backward(Layer& layer, const LayerCache& cache, const Matrix<Scalar>& dy);

  EncoderConfig config_;
  Parameter<Scalar> word_embeddings_, position_embeddings_, token_type_embeddings_;
  LayerNorm<Scalar> embed_norm_;
  std::vector<Layer> layers_;
  Linear<Scalar> pooler_;
};

// Intent logits from the pooled vector: pooled * W + b.
template <typename Scalar>
RowVector<Scalar> pooled_intent_logits(const RowVector<Scalar>& pooled, const Linear<Scalar>& head) {
  check_dims(pooled.cols() == head.in_features(),
             "intent head expects width " + std::to_string(head.in_features()) + ", got " +
                 std::to_string(pooled.cols()));
  return pooled * head.weight.value + head.bias.value;
}

// Weights of a converted pretrained checkpoint directory: `config.json`,
// `weights.bin` and `vocab.txt`.
EncoderConfig load_pretrained_config(const std::filesystem::path& dir);

template <typename Scalar>
TransformerEncoder<Scalar> load_pretrained_encoder(const std::filesystem::path& dir);

extern template class TransformerEncoder<float>;
extern template class TransformerEncoder<double>;

}  // namespace intentaug
