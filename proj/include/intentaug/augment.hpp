#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentaug/corpus.hpp"
#include "intentaug/tokenizer.hpp"

namespace intentaug {

enum class RenderMode { raw, camel_split };

RenderMode parse_render_mode(std::string_view text);
std::string_view to_string(RenderMode mode);

// Surface words an intent label contributes to the augmented input.
struct IntentRendering {
  RenderMode mode = RenderMode::raw;
  std::vector<std::string> words;
};

// raw: the label as one word. camel_split: words split at lower->upper,
// acronym->word ("USWeather" -> US Weather) and letter<->digit boundaries,
// with any non-alphanumeric character acting as a separator. Lowercased in
// uncased mode. Throws DataError on an empty label.
IntentRendering render_intent(std::string_view label, RenderMode mode, Casing casing);

inline constexpr std::string_view kDefaultSeparator = "#";

// utterance ++ [separator] ++ intent words
struct AugmentedInput {
  std::vector<std::string> utterance;
  std::string separator{kDefaultSeparator};
  IntentRendering intent;

  std::size_t separator_position() const { return utterance.size(); }
  std::vector<std::string> surface() const;
};

AugmentedInput build_augmented_input(std::span<const std::string> utterance, IntentRendering intent,
                                     std::string_view separator = kDefaultSeparator);

// Subword-level view of one input with the bookkeeping needed to route slot
// supervision and to isolate the intent chunk.
//
// Layout: [CLS] utterance-subwords [separator-subwords intent-subwords] [SEP]
struct AlignedEncoding {
  std::vector<int> ids;
  std::vector<bool> is_first_subword;  // first piece of an utterance word
  std::vector<bool> is_special;        // [CLS] / [SEP]
  std::vector<bool> is_separator;      // anchor of the separator literal
  std::vector<bool> is_intent_chunk;
  std::vector<std::optional<int>> word_index;  // utterance word, none elsewhere

  int num_words = 0;
  bool augmented = false;
  int separator_position = -1;
  int chunk_begin = 0;  // [chunk_begin, chunk_end)
  int chunk_end = 0;

  int length() const { return static_cast<int>(ids.size()); }
  int num_chunks() const { return chunk_end - chunk_begin; }

  // Subword positions that carry slot supervision, one per utterance word.
  std::vector<int> supervised_positions() const;
};

// Encodes a plain utterance (no augmentation).
AlignedEncoding tokenize_and_align(std::span<const std::string> utterance, const SubwordTokenizer& tokenizer,
                                   int max_len);

// Encodes utterance ++ separator ++ intent. The separator anchor is the first
// subword after the last utterance subword; the intent chunk is every subword
// after the separator's pieces and before the trailing [SEP].
AlignedEncoding tokenize_and_align(const AugmentedInput& input, const SubwordTokenizer& tokenizer, int max_len);

}  // namespace intentaug
