#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace intentaug {

enum class Casing { cased, uncased };

Casing parse_casing(std::string_view text);
std::string_view to_string(Casing casing);

// One annotated utterance: words, their IOB slot tags and the intent label.
struct LabeledUtterance {
  std::vector<std::string> tokens;
  std::vector<std::string> slot_tags;
  std::string intent;

  bool operator==(const LabeledUtterance&) const = default;
};

// True if `tag` is `O`, `B-<label>` or `I-<label>` with a non-empty label.
bool is_valid_iob_tag(std::string_view tag);

// Throws DataError describing the first violated invariant.
void validate(const LabeledUtterance& utterance);

struct Corpus {
  std::string split;
  std::vector<LabeledUtterance> utterances;
  Casing casing = Casing::uncased;

  std::size_t size() const { return utterances.size(); }
  bool empty() const { return utterances.empty(); }
  bool operator==(const Corpus&) const = default;
};

// File names of the three line-parallel corpus files.
inline constexpr std::string_view kTokensFile = "seq.in";
inline constexpr std::string_view kTagsFile = "seq.out";
inline constexpr std::string_view kIntentFile = "label";

// Reads `dir/seq.in`, `dir/seq.out` and `dir/label`. In uncased mode tokens
// are lowercased; tags and intent labels are never touched.
Corpus load_corpus(const std::filesystem::path& dir, std::string split, Casing casing);

// Writes the three files into `dir` (created if missing). Refuses an empty
// corpus.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// Ordered label inventory with a reserved unknown entry at the end of each
// list. Order is first occurrence in the corpus.
class LabelVocabulary {
 public:
  static constexpr std::string_view kUnknown = "<unk>";

  LabelVocabulary() = default;
  LabelVocabulary(std::vector<std::string> intents, std::vector<std::string> slots);

  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& slots() const { return slots_; }

  int num_intents() const { return static_cast<int>(intents_.size()); }
  int num_slots() const { return static_cast<int>(slots_.size()); }

  // Unseen labels map to the unknown index.
  int intent_index(std::string_view label) const;
  int slot_index(std::string_view tag) const;
  bool has_intent(std::string_view label) const;
  bool has_slot(std::string_view tag) const;

  const std::string& intent_label(int index) const;
  const std::string& slot_label(int index) const;

  int unknown_intent() const { return num_intents() - 1; }
  int unknown_slot() const { return num_slots() - 1; }
  int outside_slot() const { return slot_index("O"); }

  bool operator==(const LabelVocabulary& other) const {
    return intents_ == other.intents_ && slots_ == other.slots_;
  }

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> slots_;
  std::unordered_map<std::string, int> intent_ids_;
  std::unordered_map<std::string, int> slot_ids_;
};

LabelVocabulary build_vocabularies(const Corpus& corpus);

struct PatchEntry {
  std::vector<std::string> match_tokens;
  std::optional<std::vector<std::string>> tokens;
  std::optional<std::string> intent;
  std::optional<std::vector<std::string>> slot_tags;
};

struct DatasetPatch {
  std::vector<PatchEntry> entries;
};

// One JSON object per line with `match_tokens` and optional `tokens`,
// `intent`, `slot_tags`. Token fields accept either a space-joined string or
// an array of strings. Blank lines are skipped.
DatasetPatch load_patch(const std::filesystem::path& file);
void save_patch(const DatasetPatch& patch, const std::filesystem::path& file);

struct PatchSummary {
  std::size_t utterances_changed = 0;
  std::size_t tokens_changed = 0;
  std::size_t intents_changed = 0;
  std::size_t slots_changed = 0;
};

struct PatchResult {
  Corpus corpus;
  PatchSummary summary;
};

// Applies every entry or none. All unmatched, ambiguous and misaligned entries
// are collected and reported together in one DataError.
PatchResult apply_patch(const Corpus& corpus, const DatasetPatch& patch);

std::string join_tokens(const std::vector<std::string>& tokens);
std::vector<std::string> split_tokens(std::string_view line);
std::string to_lower(std::string_view text);

}  // namespace intentaug
