#include "intentaug/augment.hpp"

#include <cctype>

#include "intentaug/error.hpp"

namespace intentaug {

RenderMode parse_render_mode(std::string_view text) {
  if (text == "raw") return RenderMode::raw;
  if (text == "camel_split") return RenderMode::camel_split;
  throw ConfigError("intent rendering must be 'raw' or 'camel_split', got '" + std::string(text) + "'");
}

std::string_view to_string(RenderMode mode) {
  return mode == RenderMode::raw ? "raw" : "camel_split";
}

namespace {

enum class CharClass { lower, upper, digit, other };

CharClass classify(unsigned char c) {
  if (std::islower(c)) return CharClass::lower;
  if (std::isupper(c)) return CharClass::upper;
  if (std::isdigit(c)) return CharClass::digit;
  // Non-ASCII bytes stay inside words.
  if (c >= 0x80) return CharClass::lower;
  return CharClass::other;
}

std::vector<std::string> camel_words(std::string_view label) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < label.size(); ++i) {
    const auto c = static_cast<unsigned char>(label[i]);
    const auto cls = classify(c);
    if (cls == CharClass::other) {
      flush();
      continue;
    }
    if (!current.empty()) {
      const auto prev = classify(static_cast<unsigned char>(current.back()));
      const bool next_lower =
          i + 1 < label.size() && classify(static_cast<unsigned char>(label[i + 1])) == CharClass::lower;
      const bool boundary = (prev == CharClass::lower && cls == CharClass::upper) ||
                            (prev == CharClass::upper && cls == CharClass::upper && next_lower) ||
                            ((prev == CharClass::digit) != (cls == CharClass::digit));
      if (boundary) flush();
    }
    current += static_cast<char>(c);
  }
  flush();
  return words;
}

}  // namespace

IntentRendering render_intent(std::string_view label, RenderMode mode, Casing casing) {
  if (label.empty()) throw DataError("cannot render an empty intent label");
  IntentRendering rendering{mode, {}};
  if (mode == RenderMode::raw) {
    rendering.words.emplace_back(label);
  } else {
    rendering.words = camel_words(label);
    if (rendering.words.empty()) {
      throw DataError("intent label '" + std::string(label) + "' has no alphanumeric characters");
    }
  }
  if (casing == Casing::uncased) {
    for (auto& word : rendering.words) word = to_lower(word);
  }
  return rendering;
}

std::vector<std::string> AugmentedInput::surface() const {
  std::vector<std::string> out = utterance;
  out.push_back(separator);
  out.insert(out.end(), intent.words.begin(), intent.words.end());
  return out;
}

AugmentedInput build_augmented_input(std::span<const std::string> utterance, IntentRendering intent,
                                     std::string_view separator) {
  return AugmentedInput{{utterance.begin(), utterance.end()}, std::string(separator), std::move(intent)};
}

std::vector<int> AlignedEncoding::supervised_positions() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(num_words));
  for (int i = 0; i < length(); ++i) {
    if (is_first_subword[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

namespace {

void push(AlignedEncoding& enc, int id, bool first, bool special, std::optional<int> word) {
  enc.ids.push_back(id);
  enc.is_first_subword.push_back(first);
  enc.is_special.push_back(special);
  enc.is_separator.push_back(false);
  enc.is_intent_chunk.push_back(false);
  enc.word_index.push_back(word);
}

AlignedEncoding align(std::span<const std::string> utterance, const std::vector<SubwordPiece>& pieces,
                      const SubwordTokenizer& tokenizer, int max_len, bool augmented) {
  if (utterance.empty()) throw DataError("cannot encode an empty utterance");
  const int total = static_cast<int>(pieces.size()) + 2;
  if (total > max_len) {
    throw OverflowError("tokenized length " + std::to_string(total) + " exceeds max_len " +
                        std::to_string(max_len) + " for utterance '" +
                        join_tokens({utterance.begin(), utterance.end()}) + "'");
  }

  const int num_words = static_cast<int>(utterance.size());
  AlignedEncoding enc;
  enc.num_words = num_words;
  enc.augmented = augmented;
  enc.ids.reserve(static_cast<std::size_t>(total));
  push(enc, tokenizer.cls_id(), false, true, std::nullopt);

  int previous_word = -1;
  for (const auto& piece : pieces) {
    if (piece.word < num_words) {
      const bool first = piece.word != previous_word;
      push(enc, piece.id, first, false, piece.word);
      previous_word = piece.word;
      continue;
    }
    const int position = enc.length();
    push(enc, piece.id, false, false, std::nullopt);
    if (piece.word == num_words) {
      if (enc.separator_position < 0) {
        enc.separator_position = position;
        enc.is_separator.back() = true;
      }
    } else {
      if (enc.chunk_end == 0) enc.chunk_begin = position;
      enc.chunk_end = position + 1;
      enc.is_intent_chunk.back() = true;
    }
  }
  push(enc, tokenizer.sep_id(), false, true, std::nullopt);

  int firsts = 0;
  for (bool f : enc.is_first_subword) firsts += f;
  if (firsts != num_words) throw DataError("tokenizer dropped an utterance word");
  if (augmented && (enc.separator_position < 0 || enc.num_chunks() < 1)) {
    throw DataError("augmented input lost its separator or intent chunk during tokenization");
  }
  return enc;
}

}  // namespace

AlignedEncoding tokenize_and_align(std::span<const std::string> utterance, const SubwordTokenizer& tokenizer,
                                   int max_len) {
  return align(utterance, tokenizer.encode(utterance), tokenizer, max_len, false);
}

AlignedEncoding tokenize_and_align(const AugmentedInput& input, const SubwordTokenizer& tokenizer, int max_len) {
  if (input.intent.words.empty()) throw DataError("augmented input has no intent words");
  const auto surface = input.surface();
  return align(input.utterance, tokenizer.encode(surface), tokenizer, max_len, true);
}

}  // namespace intentaug
