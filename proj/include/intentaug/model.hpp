#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "intentaug/augment.hpp"
#include "intentaug/corpus.hpp"
#include "intentaug/encoder.hpp"
#include "intentaug/fusion.hpp"
#include "intentaug/tokenizer.hpp"

namespace intentaug {

// Everything needed to rebuild a model's architecture and input pipeline.
struct ModelSpec {
  EncoderConfig encoder;
  FusionConfig fusion;
  // Append "<separator> <intent>" and decode slots from a second pass.
  bool augment = true;
  RenderMode rendering = RenderMode::raw;
  std::string separator{kDefaultSeparator};
  int max_len = 50;
  Casing casing = Casing::uncased;
  double head_dropout = 0.1;

  void validate() const;
};

// Model output for one utterance.
struct PredictionRecord {
  std::vector<std::string> tokens;
  std::string intent;
  std::vector<std::string> tags;  // one per utterance token
  double intent_margin = 0;       // top-1 minus top-2 intent logit
};

enum class IntentSource { gold, predicted };

// Training targets for one utterance, with its encodings precomputed.
struct TrainItem {
  std::vector<std::string> tokens;
  AlignedEncoding plain;
  std::optional<AlignedEncoding> gold_augmented;
  int intent = 0;
  std::vector<int> slots;  // one per utterance word
};

// Encoder + intent head + intent-conditioned slot head.
template <typename Scalar>
class JointModel {
 public:
  struct PassCache {
    typename TransformerEncoder<Scalar>::Cache encoder;
    Matrix<Scalar> pooled_dropout, hidden_dropout;
    RowVector<Scalar> pooled;   // after dropout
    Matrix<Scalar> hidden;      // after dropout
    Matrix<Scalar> concat_input;  // transform fusion input
    Matrix<Scalar> fused;
    double divisor = 1.0;
  };

  struct PassOutput {
    RowVector<Scalar> intent_logits;
    Matrix<Scalar> slot_logits;  // [seq_len x num_slots], all positions
  };

  JointModel(ModelSpec spec, LabelVocabulary labels, WordPieceTokenizer tokenizer);
  // Wraps an existing encoder (e.g. a converted pretrained checkpoint).
  JointModel(ModelSpec spec, LabelVocabulary labels, WordPieceTokenizer tokenizer, TransformerEncoder<Scalar> encoder);

  const ModelSpec& spec() const { return spec_; }
  const LabelVocabulary& labels() const { return labels_; }
  const WordPieceTokenizer& tokenizer() const { return tokenizer_; }
  const TransformerEncoder<Scalar>& encoder() const { return encoder_; }
  TransformerEncoder<Scalar>& encoder() { return encoder_; }

  // Initializes the heads; the encoder too unless `keep_encoder`.
  void init(Rng& rng, bool keep_encoder = false);

  AlignedEncoding encode_plain(std::span<const std::string> tokens) const;
  AlignedEncoding encode_augmented(std::span<const std::string> tokens, const std::string& intent_label) const;

  PassOutput forward(const AlignedEncoding& enc, bool want_intent, bool want_slots, Mode mode, Rng* rng,
                     PassCache* cache) const;
  void backward(const AlignedEncoding& enc, const PassCache& cache, const RowVector<Scalar>& d_intent_logits,
                const Matrix<Scalar>& d_slot_logits);

  // Forward + backward for one item. `intent_weight` scales the intent
  // cross-entropy; `slot_weight` scales each supervised position's
  // cross-entropy (or the whole CRF negative log-likelihood). Returns the
  // weighted loss.
  Scalar accumulate(const TrainItem& item, IntentSource source, Scalar intent_weight, Scalar slot_weight, Rng& rng);

  // Two-pass inference: intent from the plain utterance, slots from the
  // augmented re-encoding (single pass when augmentation is off).
  PredictionRecord predict(std::span<const std::string> tokens) const;

  // Predicted intent index, never the unknown label.
  int predict_intent(const RowVector<Scalar>& logits) const;
  std::vector<int> decode_slots(const Matrix<Scalar>& slot_logits, std::span<const int> positions) const;

  void zero_grad();

  template <typename Fn>
  void visit(Fn&& fn) {
    encoder_.visit(fn);
    intent_head_.visit("intent_head", fn);
    slot_head_.visit("slot_head", fn);
    if (spec_.fusion.method == FusionMethod::transform) transform_.visit("fusion.transform", fn);
    if (spec_.fusion.use_crf) crf_.visit("crf", fn);
  }

  Linear<Scalar>& intent_head() { return intent_head_; }
  SlotHead<Scalar>& slot_head() { return slot_head_; }
  TransformHead<Scalar>& transform_head() { return transform_; }
  CrfLayer<Scalar>& crf() { return crf_; }

 private:
  void build_heads();

  ModelSpec spec_;
  LabelVocabulary labels_;
  WordPieceTokenizer tokenizer_;
  TransformerEncoder<Scalar> encoder_;
  Linear<Scalar> intent_head_;
  SlotHead<Scalar> slot_head_;
  TransformHead<Scalar> transform_;
  CrfLayer<Scalar> crf_;
};

extern template class JointModel<float>;
extern template class JointModel<double>;

}  // namespace intentaug
