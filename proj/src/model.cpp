#include "intentaug/model.hpp"

#include <limits>

namespace intentaug {

void ModelSpec::validate() const {
  encoder.validate();
  if (max_len <= 2) throw ConfigError("max_len must exceed 2 (room for [CLS] and [SEP])");
  if (max_len > encoder.max_sequence_length) {
    throw ConfigError("max_len (" + std::to_string(max_len) + ") exceeds encoder.max_sequence_length (" +
                      std::to_string(encoder.max_sequence_length) + ")");
  }
  if (!augment && fusion.method != FusionMethod::none) {
    throw ConfigError("fusion.method '" + std::string(to_string(fusion.method)) +
                      "' needs the augmented input; set augment.enabled: true");
  }
  if (separator.empty()) throw ConfigError("augment.separator must not be empty");
  if (head_dropout < 0 || head_dropout >= 1) throw ConfigError("head dropout must be in [0, 1)");
}

template <typename Scalar>
JointModel<Scalar>::JointModel(ModelSpec spec, LabelVocabulary labels, WordPieceTokenizer tokenizer)
    : spec_(std::move(spec)), labels_(std::move(labels)), tokenizer_(std::move(tokenizer)) {
  spec_.encoder.vocab_size = tokenizer_.vocab_size();
  spec_.validate();
  encoder_ = TransformerEncoder<Scalar>(spec_.encoder);
  build_heads();
}

template <typename Scalar>
JointModel<Scalar>::JointModel(ModelSpec spec, LabelVocabulary labels, WordPieceTokenizer tokenizer,
                               TransformerEncoder<Scalar> encoder)
    : spec_(std::move(spec)), labels_(std::move(labels)), tokenizer_(std::move(tokenizer)), encoder_(std::move(encoder)) {
  spec_.encoder = encoder_.config();
  if (spec_.encoder.vocab_size != tokenizer_.vocab_size()) {
    throw ConfigError("tokenizer vocabulary (" + std::to_string(tokenizer_.vocab_size()) +
                      ") does not match encoder vocab_size (" + std::to_string(spec_.encoder.vocab_size) + ")");
  }
  spec_.validate();
  build_heads();
}

template <typename Scalar>
void JointModel<Scalar>::build_heads() {
  const Eigen::Index hidden = spec_.encoder.hidden_size;
  intent_head_ = Linear<Scalar>(hidden, labels_.num_intents());
  slot_head_ = SlotHead<Scalar>(spec_.fusion.slot_input_width(hidden), labels_.num_slots());
  if (spec_.fusion.method == FusionMethod::transform) {
    transform_ = TransformHead<Scalar>(hidden, spec_.fusion.transform_activation);
  }
  if (spec_.fusion.use_crf) {
    crf_ = CrfLayer<Scalar>(labels_.num_slots());
    if (spec_.fusion.crf_constraints) crf_.constrain_iob(labels_.slots());
  }
}

template <typename Scalar>
void JointModel<Scalar>::init(Rng& rng, bool keep_encoder) {
  if (!keep_encoder) encoder_.init(rng);
  const auto range = static_cast<Scalar>(spec_.encoder.initializer_range);
  intent_head_.weight.normal_init(rng, range);
  intent_head_.bias.value.setZero();
  slot_head_.weight.normal_init(rng, range);
  slot_head_.bias.value.setZero();
  if (spec_.fusion.method == FusionMethod::transform) {
    transform_.dense.weight.normal_init(rng, range);
    transform_.dense.bias.value.setZero();
  }
  if (spec_.fusion.use_crf) {
    crf_.transitions.value.setZero();
    crf_.start.value.setZero();
    crf_.end.value.setZero();
  }
}

template <typename Scalar>
AlignedEncoding JointModel<Scalar>::encode_plain(std::span<const std::string> tokens) const {
  return tokenize_and_align(tokens, tokenizer_, spec_.max_len);
}

template <typename Scalar>
AlignedEncoding JointModel<Scalar>::encode_augmented(std::span<const std::string> tokens,
                                                     const std::string& intent_label) const {
  auto input = build_augmented_input(tokens, render_intent(intent_label, spec_.rendering, spec_.casing), spec_.separator);
  return tokenize_and_align(input, tokenizer_, spec_.max_len);
}

template <typename Scalar>
typename JointModel<Scalar>::PassOutput JointModel<Scalar>::forward(const AlignedEncoding& enc, bool want_intent,
                                                                    bool want_slots, Mode mode, Rng* rng,
                                                                    PassCache* cache) const {
  const bool train = mode == Mode::train;
  const auto p = static_cast<Scalar>(spec_.head_dropout);
  auto out_enc = encoder_.forward(enc.ids, {}, mode, rng, cache ? &cache->encoder : nullptr);

  PassOutput out;
  if (want_intent) {
    RowVector<Scalar> pooled = out_enc.pooled;
    if (train && p > 0) {
      Matrix<Scalar> mask = dropout_mask<Scalar>(1, pooled.cols(), p, *rng);
      pooled = pooled.cwiseProduct(mask);
      if (cache) cache->pooled_dropout = std::move(mask);
    }
    out.intent_logits = pooled_intent_logits(pooled, intent_head_);
    if (cache) cache->pooled = std::move(pooled);
  }
  if (want_slots) {
    Matrix<Scalar> hidden = std::move(out_enc.hidden_states);
    if (train && p > 0) {
      Matrix<Scalar> mask = dropout_mask<Scalar>(hidden.rows(), hidden.cols(), p, *rng);
      hidden = hidden.cwiseProduct(mask);
      if (cache) cache->hidden_dropout = std::move(mask);
    }
    Matrix<Scalar> fused;
    const auto method = spec_.fusion.method;
    if (method == FusionMethod::none) {
      fused = hidden;
    } else {
      if (!enc.augmented) throw DimensionError("intent fusion needs an augmented encoding");
      const auto intent = reduce_intent(hidden.middleRows(enc.chunk_begin, enc.num_chunks()), spec_.fusion.reduction);
      if (cache) cache->divisor = spec_.fusion.reduction.divisor(enc.num_chunks());
      if (method == FusionMethod::concat) {
        fused = fuse_concat(hidden, intent);
      } else if (method == FusionMethod::add) {
        fused = fuse_add(hidden, intent);
      } else {
        Matrix<Scalar> input = fuse_concat(hidden, intent);
        fused = apply_activation(transform_.activation, transform_.dense.forward(input));
        if (cache) cache->concat_input = std::move(input);
      }
    }
    out.slot_logits = slot_logits(fused, slot_head_);
    if (cache) {
      cache->hidden = std::move(hidden);
      cache->fused = std::move(fused);
    }
  }
  return out;
}

template <typename Scalar>
void JointModel<Scalar>::backward(const AlignedEncoding& enc, const PassCache& cache,
                                  const RowVector<Scalar>& d_intent_logits, const Matrix<Scalar>& d_slot_logits) {
  const auto len = static_cast<Eigen::Index>(enc.ids.size());
  Matrix<Scalar> d_hidden = Matrix<Scalar>::Zero(len, spec_.encoder.hidden_size);
  RowVector<Scalar> d_pooled;

  if (d_intent_logits.size()) {
    d_pooled = intent_head_.backward(cache.pooled, d_intent_logits);
    if (cache.pooled_dropout.size()) d_pooled = d_pooled.cwiseProduct(cache.pooled_dropout);
  }
  if (d_slot_logits.size()) {
    Matrix<Scalar> d_fused = slot_head_.backward(cache.fused, d_slot_logits);
    const auto method = spec_.fusion.method;
    if (method == FusionMethod::none) {
      d_hidden = std::move(d_fused);
    } else {
      std::pair<Matrix<Scalar>, RowVector<Scalar>> split;
      if (method == FusionMethod::concat) {
        split = fuse_concat_backward<Scalar>(d_fused);
      } else if (method == FusionMethod::add) {
        split = fuse_add_backward<Scalar>(d_fused);
      } else {
        split = fuse_transform_backward<Scalar>(transform_, cache.concat_input, cache.fused, d_fused);
      }
      d_hidden = std::move(split.first);
      const RowVector<Scalar> d_row = split.second / static_cast<Scalar>(cache.divisor);
      d_hidden.middleRows(enc.chunk_begin, enc.num_chunks()).rowwise() += d_row;
    }
    if (cache.hidden_dropout.size()) d_hidden = d_hidden.cwiseProduct(cache.hidden_dropout);
  }
  encoder_.backward(cache.encoder, d_hidden, d_pooled);
}

template <typename Scalar>
Scalar JointModel<Scalar>::accumulate(const TrainItem& item, IntentSource source, Scalar intent_weight,
                                      Scalar slot_weight, Rng& rng) {
  auto slot_loss = [&](const AlignedEncoding& enc, const Matrix<Scalar>& logits, Matrix<Scalar>& d_logits) {
    const auto positions = enc.supervised_positions();
    if (spec_.fusion.use_crf) {
      return crf_neg_log_likelihood<Scalar>(logits, item.slots, crf_, positions, slot_weight, &d_logits);
    }
    return softmax_cross_entropy<Scalar>(logits, positions, item.slots, slot_weight, &d_logits);
  };
  const int gold_intent[] = {item.intent};
  const int first_row[] = {0};

  PassCache plain_cache;
  const bool single_pass = !spec_.augment;
  auto plain = forward(item.plain, true, single_pass, Mode::train, &rng, &plain_cache);
  Matrix<Scalar> intent_logits = plain.intent_logits;
  Matrix<Scalar> d_intent;
  Scalar loss = softmax_cross_entropy<Scalar>(intent_logits, first_row, gold_intent, intent_weight, &d_intent);

  if (single_pass) {
    Matrix<Scalar> d_slots;
    loss += slot_loss(item.plain, plain.slot_logits, d_slots);
    backward(item.plain, plain_cache, d_intent.row(0), d_slots);
    return loss;
  }
  backward(item.plain, plain_cache, d_intent.row(0), Matrix<Scalar>());

  AlignedEncoding predicted;
  const AlignedEncoding* augmented = item.gold_augmented ? &*item.gold_augmented : nullptr;
  if (source == IntentSource::predicted || !augmented) {
    const int intent = source == IntentSource::predicted ? predict_intent(plain.intent_logits) : item.intent;
    predicted = encode_augmented(item.tokens, labels_.intent_label(intent));
    augmented = &predicted;
  }
  PassCache aug_cache;
  auto aug = forward(*augmented, false, true, Mode::train, &rng, &aug_cache);
  Matrix<Scalar> d_slots;
  loss += slot_loss(*augmented, aug.slot_logits, d_slots);
  backward(*augmented, aug_cache, RowVector<Scalar>(), d_slots);
  return loss;
}

template <typename Scalar>
int JointModel<Scalar>::predict_intent(const RowVector<Scalar>& logits) const {
  RowVector<Scalar> masked = logits;
  masked(labels_.unknown_intent()) = -std::numeric_limits<Scalar>::infinity();
  return static_cast<int>(argmax(masked));
}

template <typename Scalar>
std::vector<int> JointModel<Scalar>::decode_slots(const Matrix<Scalar>& slot_logits,
                                                  std::span<const int> positions) const {
  Matrix<Scalar> masked = slot_logits;
  masked.col(labels_.unknown_slot()).setConstant(-std::numeric_limits<Scalar>::infinity());
  if (spec_.fusion.use_crf) return crf_decode(masked, crf_, positions);
  std::vector<int> out;
  out.reserve(positions.size());
  for (int row : positions) out.push_back(static_cast<int>(argmax(masked.row(row))));
  return out;
}

template <typename Scalar>
PredictionRecord JointModel<Scalar>::predict(std::span<const std::string> tokens) const {
  const auto plain = encode_plain(tokens);
  const bool single_pass = !spec_.augment;
  auto first = forward(plain, true, single_pass, Mode::eval, nullptr, nullptr);

  PredictionRecord record;
  record.tokens.assign(tokens.begin(), tokens.end());
  const int intent = predict_intent(first.intent_logits);
  record.intent = labels_.intent_label(intent);
  if (first.intent_logits.size() > 1) {
    RowVector<Scalar> rest = first.intent_logits;
    rest(intent) = -std::numeric_limits<Scalar>::infinity();
    rest(labels_.unknown_intent()) = -std::numeric_limits<Scalar>::infinity();
    const Scalar runner_up = rest.maxCoeff();
    record.intent_margin = std::isfinite(runner_up) ? static_cast<double>(first.intent_logits(intent) - runner_up) : 0.0;
  }

  std::vector<int> slots;
  if (single_pass) {
    slots = decode_slots(first.slot_logits, plain.supervised_positions());
  } else {
    const auto augmented = encode_augmented(tokens, record.intent);
    auto second = forward(augmented, false, true, Mode::eval, nullptr, nullptr);
    slots = decode_slots(second.slot_logits, augmented.supervised_positions());
  }
  for (int s : slots) record.tags.push_back(labels_.slot_label(s));
  return record;
}

template <typename Scalar>
void JointModel<Scalar>::zero_grad() {
  visit([](const std::string&, Parameter<Scalar>& p) { p.zero_grad(); });
}

template class JointModel<float>;
template class JointModel<double>;

}  // namespace intentaug
