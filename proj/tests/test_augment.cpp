#include <doctest.h>

#include "intentaug/augment.hpp"
#include "intentaug/error.hpp"

using namespace intentaug;

namespace {

using Words = std::vector<std::string>;

WordPieceTokenizer tokenizer() {
  return WordPieceTokenizer({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "find", "movie", "times", "#", "search",
                             "creative", "work", "play", "##ing", "searchcreativework", "get", "weather"},
                            true);
}

}  // namespace

TEST_CASE("camel_split rendering") {
  CHECK(render_intent("SearchCreativeWork", RenderMode::camel_split, Casing::uncased).words ==
        Words{"search", "creative", "work"});
  CHECK(render_intent("SearchCreativeWork", RenderMode::camel_split, Casing::cased).words ==
        Words{"Search", "Creative", "Work"});
  CHECK(render_intent("USWeather", RenderMode::camel_split, Casing::cased).words == Words{"US", "Weather"});
  CHECK(render_intent("atis_flight#atis_airfare", RenderMode::camel_split, Casing::uncased).words ==
        Words{"atis", "flight", "atis", "airfare"});
  CHECK(render_intent("Top10Songs", RenderMode::camel_split, Casing::cased).words == Words{"Top", "10", "Songs"});
  CHECK(render_intent("SearchCreativeWork", RenderMode::raw, Casing::uncased).words == Words{"searchcreativework"});
  CHECK_THROWS_AS(render_intent("", RenderMode::raw, Casing::uncased), DataError);
  CHECK_THROWS_AS(render_intent("__", RenderMode::camel_split, Casing::uncased), DataError);
}

TEST_CASE("renderings agree after case folding and separator removal") {
  for (const auto* label : {"SearchCreativeWork", "GetWeather", "atis_ground_service", "PlayMusic", "AddToPlaylist"}) {
    std::string joined_split, raw;
    for (const auto& w : render_intent(label, RenderMode::camel_split, Casing::uncased).words) joined_split += w;
    const auto raw_rendering = render_intent(label, RenderMode::raw, Casing::uncased);
    for (char c : raw_rendering.words.front()) {
      if (std::isalnum(static_cast<unsigned char>(c))) raw += c;
    }
    CHECK(joined_split == raw);
  }
}

TEST_CASE("augmented surface is utterance, separator, intent words") {
  const Words utterance{"find", "movie", "times"};
  const auto input = build_augmented_input(utterance, render_intent("SearchCreativeWork", RenderMode::camel_split,
                                                                    Casing::uncased));
  CHECK(input.surface() == Words{"find", "movie", "times", "#", "search", "creative", "work"});
  CHECK(input.separator_position() == 3);
}

TEST_CASE("alignment marks first subwords, separator and the intent chunk") {
  const auto tok = tokenizer();
  const Words utterance{"playing", "movie"};

  const auto plain = tokenize_and_align(utterance, tok, 16);
  CHECK(plain.length() == 5);  // [CLS] play ##ing movie [SEP]
  CHECK(plain.supervised_positions() == std::vector<int>{1, 3});
  CHECK(plain.is_special.front());
  CHECK(plain.is_special.back());
  CHECK_FALSE(plain.augmented);
  CHECK(plain.num_chunks() == 0);

  const auto input =
      build_augmented_input(utterance, render_intent("SearchCreativeWork", RenderMode::camel_split, Casing::uncased));
  const auto aug = tokenize_and_align(input, tok, 16);
  // [CLS] play ##ing movie # search creative work [SEP]
  CHECK(aug.length() == 9);
  CHECK(aug.supervised_positions() == std::vector<int>{1, 3});
  CHECK(aug.separator_position == 4);
  CHECK(aug.is_separator[4]);
  CHECK(aug.chunk_begin == 5);
  CHECK(aug.chunk_end == 8);
  CHECK(aug.num_chunks() == 3);
  for (int i = 0; i < aug.length(); ++i) {
    CHECK(aug.is_intent_chunk[static_cast<std::size_t>(i)] == (i >= 5 && i < 8));
    CHECK(aug.word_index[static_cast<std::size_t>(i)].has_value() == (i >= 1 && i <= 3));
  }

  const auto raw = tokenize_and_align(
      build_augmented_input(utterance, render_intent("SearchCreativeWork", RenderMode::raw, Casing::uncased)), tok, 16);
  CHECK(raw.num_chunks() == 1);
}

TEST_CASE("overflow and empty inputs are rejected") {
  const auto tok = tokenizer();
  const Words utterance{"find", "movie", "times"};
  CHECK_NOTHROW(tokenize_and_align(utterance, tok, 5));
  CHECK_THROWS_AS(tokenize_and_align(utterance, tok, 4), OverflowError);
  const auto input = build_augmented_input(utterance, render_intent("GetWeather", RenderMode::camel_split,
                                                                    Casing::uncased));
  CHECK_NOTHROW(tokenize_and_align(input, tok, 8));
  CHECK_THROWS_AS(tokenize_and_align(input, tok, 7), OverflowError);
  CHECK_THROWS_AS(tokenize_and_align(Words{}, tok, 8), DataError);
}
