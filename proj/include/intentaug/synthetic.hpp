#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "intentaug/corpus.hpp"

namespace intentaug {

// Template-generated corpus in which city and date words are tagged
// according to the utterance intent.
struct SyntheticOptions {
  std::size_t train_size = 2000;
  std::size_t dev_size = 400;
  std::size_t test_size = 400;
  std::uint64_t seed = 7;
  // Fraction of utterances built from an intent cue plus a body shared by
  // all intents, so only the cue tells which slot labels apply.
  double shared_body_ratio = 0.7;
  // In the train split each city or date value is paired with only this
  // many of the intents; dev and test draw every pairing.
  std::size_t train_pairings = 1;
  // Probability that a train draw honours the pairing restriction; the rest
  // draw from the whole pool.
  double train_pairing_bias = 0.97;
};

struct SyntheticCorpus {
  Corpus train, dev, test;
};

SyntheticCorpus generate_synthetic(const SyntheticOptions& options = {});

// Words that carry more than one slot label (IOB prefix ignored) in `corpus`.
std::set<std::string> intent_dependent_words(const Corpus& corpus);

// Utterances of `corpus` that contain at least one word from `words`.
Corpus filter_containing(const Corpus& corpus, const std::set<std::string>& words);

}  // namespace intentaug
