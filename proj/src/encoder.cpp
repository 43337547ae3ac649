#include "intentaug/encoder.hpp"

#include <fstream>
#include <limits>
#include <memory>

#include <json.hpp>

#include "intentaug/weights.hpp"

namespace intentaug {

void EncoderConfig::validate() const {
  auto positive = [](int value, const char* name) {
    if (value <= 0) throw ConfigError(std::string("encoder.") + name + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(hidden_size, "hidden_size");
  positive(num_layers, "num_layers");
  positive(num_attention_heads, "num_attention_heads");
  positive(intermediate_size, "intermediate_size");
  positive(max_sequence_length, "max_sequence_length");
  positive(type_vocab_size, "type_vocab_size");
  if (hidden_size % num_attention_heads != 0) {
    throw ConfigError("encoder.hidden_size (" + std::to_string(hidden_size) +
                      ") must be divisible by encoder.num_attention_heads (" + std::to_string(num_attention_heads) +
                      ")");
  }
  if (dropout < 0 || dropout >= 1) throw ConfigError("encoder.dropout must be in [0, 1)");
  if (attention_dropout < 0 || attention_dropout >= 1) throw ConfigError("encoder.attention_dropout must be in [0, 1)");
  if (layer_norm_eps <= 0) throw ConfigError("encoder.layer_norm_eps must be positive");
  if (!(initializer_range > 0)) throw ConfigError("encoder.initializer_range must be positive");
}

template <typename Scalar>
TransformerEncoder<Scalar>::TransformerEncoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  const int h = config_.hidden_size;
  const auto eps = static_cast<Scalar>(config_.layer_norm_eps);
  word_embeddings_ = Parameter<Scalar>(config_.vocab_size, h);
  position_embeddings_ = Parameter<Scalar>(config_.max_sequence_length, h);
  token_type_embeddings_ = Parameter<Scalar>(config_.type_vocab_size, h);
  embed_norm_ = LayerNorm<Scalar>(h, eps);
  layers_.resize(static_cast<std::size_t>(config_.num_layers));
  for (auto& layer : layers_) {
    layer.query = Linear<Scalar>(h, h);
    layer.key = Linear<Scalar>(h, h);
    layer.value = Linear<Scalar>(h, h);
    layer.attn_output = Linear<Scalar>(h, h);
    layer.attn_norm = LayerNorm<Scalar>(h, eps);
    layer.intermediate = Linear<Scalar>(h, config_.intermediate_size);
    layer.output = Linear<Scalar>(config_.intermediate_size, h);
    layer.out_norm = LayerNorm<Scalar>(h, eps);
  }
  if (config_.pooler) pooler_ = Linear<Scalar>(h, h);
}

template <typename Scalar>
void TransformerEncoder<Scalar>::init(Rng& rng) {
  visit([&](const std::string& name, Parameter<Scalar>& p) {
    if (name.ends_with("LayerNorm.weight")) {
      p.value.setOnes();
    } else if (name.ends_with(".bias") || name.ends_with("LayerNorm.bias")) {
      p.value.setZero();
    } else {
      p.normal_init(rng, static_cast<Scalar>(config_.initializer_range));
    }
  });
}

template <typename Scalar>
Matrix<Scalar> TransformerEncoder<Scalar>::layer_forward(const Layer& layer, const Matrix<Scalar>& x,
                                                         std::span<const bool> valid, bool train, Rng* rng,
                                                         LayerCache* cache) const {
  const Eigen::Index len = x.rows();
  const int heads = config_.num_attention_heads;
  const Eigen::Index head_dim = config_.hidden_size / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  const auto attn_p = static_cast<Scalar>(config_.attention_dropout);
  const auto hidden_p = static_cast<Scalar>(config_.dropout);

  Matrix<Scalar> q = layer.query.forward(x);
  Matrix<Scalar> k = layer.key.forward(x);
  Matrix<Scalar> v = layer.value.forward(x);
  Matrix<Scalar> context(len, config_.hidden_size);
  if (cache) {
    cache->probs.resize(static_cast<std::size_t>(heads));
    cache->attn_dropout.resize(static_cast<std::size_t>(heads));
  }
  for (int h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * head_dim, head_dim);
    Matrix<Scalar> scores = q(Eigen::all, cols) * k(Eigen::all, cols).transpose() * scale;
    if (!valid.empty()) {
      for (Eigen::Index j = 0; j < len; ++j) {
        if (!valid[static_cast<std::size_t>(j)]) scores.col(j).setConstant(-std::numeric_limits<Scalar>::infinity());
      }
    }
    Matrix<Scalar> probs = softmax_rows(scores);
    Matrix<Scalar> used = probs;
    if (train && attn_p > 0) {
      Matrix<Scalar> mask = dropout_mask<Scalar>(len, len, attn_p, *rng);
      used = used.cwiseProduct(mask);
      if (cache) cache->attn_dropout[static_cast<std::size_t>(h)] = std::move(mask);
    }
    context(Eigen::all, cols) = used * v(Eigen::all, cols);
    if (cache) cache->probs[static_cast<std::size_t>(h)] = std::move(probs);
  }

  Matrix<Scalar> attn_out = layer.attn_output.forward(context);
  if (train && hidden_p > 0) {
    Matrix<Scalar> mask = dropout_mask<Scalar>(len, attn_out.cols(), hidden_p, *rng);
    attn_out = attn_out.cwiseProduct(mask);
    if (cache) cache->attn_out_dropout = std::move(mask);
  }
  Matrix<Scalar> after_attn =
      layer.attn_norm.forward(x + attn_out, cache ? &cache->ln_attn : nullptr);

  Matrix<Scalar> inter_pre = layer.intermediate.forward(after_attn);
  Matrix<Scalar> inter_act = gelu(inter_pre);
  Matrix<Scalar> ffn = layer.output.forward(inter_act);
  if (train && hidden_p > 0) {
    Matrix<Scalar> mask = dropout_mask<Scalar>(len, ffn.cols(), hidden_p, *rng);
    ffn = ffn.cwiseProduct(mask);
    if (cache) cache->ffn_dropout = std::move(mask);
  }
  Matrix<Scalar> out = layer.out_norm.forward(after_attn + ffn, cache ? &cache->ln_out : nullptr);

  if (cache) {
    cache->input = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->context = std::move(context);
    cache->after_attn = std::move(after_attn);
    cache->inter_pre = std::move(inter_pre);
    cache->inter_act = std::move(inter_act);
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> TransformerEncoder<Scalar>::layer_backward(Layer& layer, const LayerCache& c,
                                                          const Matrix<Scalar>& dy) {
  const int heads = config_.num_attention_heads;
  const Eigen::Index head_dim = config_.hidden_size / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));

  Matrix<Scalar> d_sum_out = layer.out_norm.backward(c.ln_out, dy);
  Matrix<Scalar> d_ffn = c.ffn_dropout.size() ? Matrix<Scalar>(d_sum_out.cwiseProduct(c.ffn_dropout)) : d_sum_out;
  Matrix<Scalar> d_inter_act = layer.output.backward(c.inter_act, d_ffn);
  Matrix<Scalar> d_inter_pre = gelu_backward(c.inter_pre, d_inter_act);
  Matrix<Scalar> d_after_attn = d_sum_out + layer.intermediate.backward(c.after_attn, d_inter_pre);

  Matrix<Scalar> d_sum_attn = layer.attn_norm.backward(c.ln_attn, d_after_attn);
  Matrix<Scalar> d_attn_out =
      c.attn_out_dropout.size() ? Matrix<Scalar>(d_sum_attn.cwiseProduct(c.attn_out_dropout)) : d_sum_attn;
  Matrix<Scalar> d_context = layer.attn_output.backward(c.context, d_attn_out);

  Matrix<Scalar> dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (int h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * head_dim, head_dim);
    const auto& probs = c.probs[static_cast<std::size_t>(h)];
    const auto& mask = c.attn_dropout[static_cast<std::size_t>(h)];
    const Matrix<Scalar> used = mask.size() ? Matrix<Scalar>(probs.cwiseProduct(mask)) : probs;
    const Matrix<Scalar> d_ctx = d_context(Eigen::all, cols);
    Matrix<Scalar> d_used = d_ctx * c.v(Eigen::all, cols).transpose();
    dv(Eigen::all, cols) = used.transpose() * d_ctx;
    Matrix<Scalar> d_probs = mask.size() ? Matrix<Scalar>(d_used.cwiseProduct(mask)) : d_used;
    Vector<Scalar> row_dot = d_probs.cwiseProduct(probs).rowwise().sum();
    Matrix<Scalar> d_scores = probs.cwiseProduct(d_probs.colwise() - row_dot) * scale;
    dq(Eigen::all, cols) = d_scores * c.k(Eigen::all, cols);
    dk(Eigen::all, cols) = d_scores.transpose() * c.q(Eigen::all, cols);
  }
  Matrix<Scalar> dx = d_sum_attn;
  dx += layer.query.backward(c.input, dq);
  dx += layer.key.backward(c.input, dk);
  dx += layer.value.backward(c.input, dv);
  return dx;
}

template <typename Scalar>
EncoderOutput<Scalar> TransformerEncoder<Scalar>::forward(std::span<const int> ids, std::span<const bool> valid,
                                                          Mode mode, Rng* rng, Cache* cache) const {
  const auto len = static_cast<Eigen::Index>(ids.size());
  if (len == 0) throw DimensionError("encoder input is empty");
  if (len > config_.max_sequence_length) {
    throw OverflowError("sequence length " + std::to_string(len) + " exceeds encoder max_sequence_length " +
                        std::to_string(config_.max_sequence_length));
  }
  if (!valid.empty() && valid.size() != ids.size()) throw DimensionError("attention mask length differs from input");
  const bool train = mode == Mode::train;
  if (train && !rng) throw Error("train-mode forward requires a random generator");

  Matrix<Scalar> x(len, config_.hidden_size);
  for (Eigen::Index i = 0; i < len; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= config_.vocab_size) {
      throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of size " +
                           std::to_string(config_.vocab_size));
    }
    x.row(i) = word_embeddings_.value.row(id) + position_embeddings_.value.row(i) + token_type_embeddings_.value.row(0);
  }
  x = embed_norm_.forward(x, cache ? &cache->ln_embed : nullptr);
  const auto hidden_p = static_cast<Scalar>(config_.dropout);
  if (train && hidden_p > 0) {
    Matrix<Scalar> mask = dropout_mask<Scalar>(len, x.cols(), hidden_p, *rng);
    x = x.cwiseProduct(mask);
    if (cache) cache->embed_dropout = std::move(mask);
  }

  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->layers.assign(layers_.size(), LayerCache{});
    cache->train = train;
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    x = layer_forward(layers_[l], x, valid, train, rng, cache ? &cache->layers[l] : nullptr);
  }

  EncoderOutput<Scalar> out;
  if (config_.pooler) {
    out.pooled = pooler_.forward(x.row(0)).array().tanh();
  } else {
    out.pooled = x.row(0);
  }
  out.hidden_states = std::move(x);
  if (cache) {
    cache->hidden = out.hidden_states;
    cache->pooled = out.pooled;
  }
  return out;
}

template <typename Scalar>
void TransformerEncoder<Scalar>::backward(const Cache& cache, const Matrix<Scalar>& d_hidden,
                                          const RowVector<Scalar>& d_pooled) {
  check_dims(d_hidden.rows() == cache.hidden.rows() && d_hidden.cols() == cache.hidden.cols(),
             "encoder backward: gradient shape differs from hidden states");
  Matrix<Scalar> dx = d_hidden;
  if (d_pooled.size()) {
    if (config_.pooler) {
      RowVector<Scalar> d_pre = d_pooled.array() * (Scalar(1) - cache.pooled.array().square());
      dx.row(0) += pooler_.backward(cache.hidden.row(0), d_pre);
    } else {
      dx.row(0) += d_pooled;
    }
  }
  for (std::size_t l = layers_.size(); l-- > 0;) dx = layer_backward(layers_[l], cache.layers[l], dx);
  if (cache.embed_dropout.size()) dx = dx.cwiseProduct(cache.embed_dropout);
  dx = embed_norm_.backward(cache.ln_embed, dx);
  for (Eigen::Index i = 0; i < dx.rows(); ++i) {
    word_embeddings_.grad.row(cache.ids[static_cast<std::size_t>(i)]) += dx.row(i);
    position_embeddings_.grad.row(i) += dx.row(i);
    token_type_embeddings_.grad.row(0) += dx.row(i);
  }
}

template <typename Scalar>
EncoderBatchOutput<Scalar> TransformerEncoder<Scalar>::encode(std::span<const AlignedEncoding> batch) const {
  EncoderBatchOutput<Scalar> out;
  if (batch.empty()) return out;
  int longest = 0;
  for (const auto& enc : batch) longest = std::max(longest, enc.length());
  if (longest > config_.max_sequence_length) {
    throw OverflowError("batch sequence length " + std::to_string(longest) + " exceeds encoder max_sequence_length " +
                        std::to_string(config_.max_sequence_length));
  }
  out.pooled.resize(static_cast<Eigen::Index>(batch.size()), config_.hidden_size);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    std::vector<int> ids = batch[b].ids;
    std::vector<bool> valid(static_cast<std::size_t>(longest), false);
    std::fill(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(ids.size()), true);
    ids.resize(static_cast<std::size_t>(longest), 0);
    // std::vector<bool> has no contiguous storage; copy into a plain buffer.
    std::unique_ptr<bool[]> mask(new bool[valid.size()]);
    std::copy(valid.begin(), valid.end(), mask.get());
    auto result = forward(ids, std::span<const bool>(mask.get(), valid.size()), Mode::eval, nullptr, nullptr);
    out.pooled.row(static_cast<Eigen::Index>(b)) = result.pooled;
    out.hidden_states.push_back(std::move(result.hidden_states));
    out.valid.push_back(std::move(valid));
  }
  return out;
}

EncoderConfig load_pretrained_config(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw CheckpointError("missing pretrained config: " + (dir / "config.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt pretrained config: " + std::string(e.what()));
  }
  EncoderConfig config;
  try {
    config.vocab_size = j.at("vocab_size").get<int>();
    config.hidden_size = j.at("hidden_size").get<int>();
    config.num_layers = j.at("num_hidden_layers").get<int>();
    config.num_attention_heads = j.at("num_attention_heads").get<int>();
    config.intermediate_size = j.at("intermediate_size").get<int>();
    config.max_sequence_length = j.at("max_position_embeddings").get<int>();
    config.type_vocab_size = j.value("type_vocab_size", 2);
    config.layer_norm_eps = j.value("layer_norm_eps", 1e-12);
    config.dropout = j.value("hidden_dropout_prob", 0.1);
    config.attention_dropout = j.value("attention_probs_dropout_prob", 0.1);
    config.initializer_range = j.value("initializer_range", 0.02);
    config.pooler = j.value("pooler", true);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("pretrained config missing field: " + std::string(e.what()));
  }
  config.pretrained = dir.string();
  return config;
}

template <typename Scalar>
TransformerEncoder<Scalar> load_pretrained_encoder(const std::filesystem::path& dir) {
  TransformerEncoder<Scalar> encoder(load_pretrained_config(dir));
  load_weights<Scalar>(encoder, dir / "weights.bin");
  return encoder;
}

template class TransformerEncoder<float>;
template class TransformerEncoder<double>;
template TransformerEncoder<float> load_pretrained_encoder<float>(const std::filesystem::path&);
template TransformerEncoder<double> load_pretrained_encoder<double>(const std::filesystem::path&);

}  // namespace intentaug
