#include "intentaug/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "intentaug/error.hpp"

namespace intentaug {

namespace fs = std::filesystem;
using json = nlohmann::json;

Casing parse_casing(std::string_view text) {
  if (text == "cased") return Casing::cased;
  if (text == "uncased") return Casing::uncased;
  throw ConfigError("casing must be 'cased' or 'uncased', got '" + std::string(text) + "'");
}

std::string_view to_string(Casing casing) {
  return casing == Casing::cased ? "cased" : "uncased";
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    if (end > pos) out.emplace_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

bool is_valid_iob_tag(std::string_view tag) {
  if (tag == "O") return true;
  return tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

void validate(const LabeledUtterance& utterance) {
  if (utterance.tokens.empty()) throw DataError("utterance has no tokens");
  if (utterance.tokens.size() != utterance.slot_tags.size()) {
    throw DataError("alignment mismatch: " + std::to_string(utterance.tokens.size()) +
                    " tokens but " + std::to_string(utterance.slot_tags.size()) + " slot tags in '" +
                    join_tokens(utterance.tokens) + "'");
  }
  for (const auto& tag : utterance.slot_tags) {
    if (!is_valid_iob_tag(tag)) {
      throw DataError("malformed slot tag '" + tag + "' in '" + join_tokens(utterance.tokens) + "'");
    }
  }
  if (utterance.intent.empty()) {
    throw DataError("empty intent label for '" + join_tokens(utterance.tokens) + "'");
  }
}

namespace {

std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing file: " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

}  // namespace

Corpus load_corpus(const fs::path& dir, std::string split, Casing casing) {
  const auto token_lines = read_lines(dir / kTokensFile);
  const auto tag_lines = read_lines(dir / kTagsFile);
  const auto intent_lines = read_lines(dir / kIntentFile);
  if (token_lines.size() != tag_lines.size() || token_lines.size() != intent_lines.size()) {
    throw DataError("line-count mismatch in " + dir.string() + ": " +
                    std::to_string(token_lines.size()) + " token lines, " +
                    std::to_string(tag_lines.size()) + " tag lines, " +
                    std::to_string(intent_lines.size()) + " intent lines");
  }

  Corpus corpus{std::move(split), {}, casing};
  corpus.utterances.reserve(token_lines.size());
  for (std::size_t i = 0; i < token_lines.size(); ++i) {
    LabeledUtterance utterance{split_tokens(token_lines[i]), split_tokens(tag_lines[i]),
                               trim(intent_lines[i])};
    if (casing == Casing::uncased) {
      for (auto& token : utterance.tokens) token = to_lower(token);
    }
    try {
      validate(utterance);
    } catch (const DataError& e) {
      throw DataError(dir.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
    corpus.utterances.push_back(std::move(utterance));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  if (corpus.empty()) throw DataError("refusing to write empty split '" + corpus.split + "'");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());

  std::ofstream tokens(dir / kTokensFile, std::ios::binary);
  std::ofstream tags(dir / kTagsFile, std::ios::binary);
  std::ofstream intents(dir / kIntentFile, std::ios::binary);
  if (!tokens || !tags || !intents) throw Error("cannot write corpus files in " + dir.string());
  for (const auto& utterance : corpus.utterances) {
    tokens << join_tokens(utterance.tokens) << '\n';
    tags << join_tokens(utterance.slot_tags) << '\n';
    intents << utterance.intent << '\n';
  }
  tokens.flush();
  tags.flush();
  intents.flush();
  if (!tokens || !tags || !intents) throw Error("I/O failure writing corpus to " + dir.string());
}

LabelVocabulary::LabelVocabulary(std::vector<std::string> intents, std::vector<std::string> slots)
    : intents_(std::move(intents)), slots_(std::move(slots)) {
  if (intents_.empty() || intents_.back() != kUnknown) intents_.emplace_back(kUnknown);
  if (std::find(slots_.begin(), slots_.end(), "O") == slots_.end()) {
    auto where = slots_.empty() || slots_.back() != kUnknown ? slots_.end() : slots_.end() - 1;
    slots_.insert(where, "O");
  }
  if (slots_.back() != kUnknown) slots_.emplace_back(kUnknown);
  for (std::size_t i = 0; i < intents_.size(); ++i) {
    if (!intent_ids_.emplace(intents_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate intent label '" + intents_[i] + "'");
    }
  }
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!slot_ids_.emplace(slots_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate slot label '" + slots_[i] + "'");
    }
  }
}

int LabelVocabulary::intent_index(std::string_view label) const {
  auto it = intent_ids_.find(std::string(label));
  return it == intent_ids_.end() ? unknown_intent() : it->second;
}

int LabelVocabulary::slot_index(std::string_view tag) const {
  auto it = slot_ids_.find(std::string(tag));
  return it == slot_ids_.end() ? unknown_slot() : it->second;
}

bool LabelVocabulary::has_intent(std::string_view label) const {
  return label != kUnknown && intent_ids_.count(std::string(label)) > 0;
}

bool LabelVocabulary::has_slot(std::string_view tag) const {
  return tag != kUnknown && slot_ids_.count(std::string(tag)) > 0;
}

const std::string& LabelVocabulary::intent_label(int index) const {
  if (index < 0 || index >= num_intents()) throw DimensionError("intent index out of range");
  return intents_[static_cast<std::size_t>(index)];
}

const std::string& LabelVocabulary::slot_label(int index) const {
  if (index < 0 || index >= num_slots()) throw DimensionError("slot index out of range");
  return slots_[static_cast<std::size_t>(index)];
}

LabelVocabulary build_vocabularies(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("cannot build vocabularies from an empty corpus");
  std::vector<std::string> intents;
  std::vector<std::string> slots;
  std::unordered_map<std::string, bool> seen_intent;
  std::unordered_map<std::string, bool> seen_slot;
  for (const auto& utterance : corpus.utterances) {
    if (seen_intent.emplace(utterance.intent, true).second) intents.push_back(utterance.intent);
    for (const auto& tag : utterance.slot_tags) {
      if (seen_slot.emplace(tag, true).second) slots.push_back(tag);
    }
  }
  return LabelVocabulary(std::move(intents), std::move(slots));
}

namespace {

std::vector<std::string> token_field(const json& value, std::string_view field, std::size_t line) {
  if (value.is_string()) return split_tokens(value.get<std::string>());
  if (value.is_array()) {
    std::vector<std::string> out;
    for (const auto& item : value) {
      if (!item.is_string()) {
        throw DataError("patch line " + std::to_string(line) + ": '" + std::string(field) +
                        "' must contain strings");
      }
      out.push_back(item.get<std::string>());
    }
    return out;
  }
  throw DataError("patch line " + std::to_string(line) + ": '" + std::string(field) +
                  "' must be a string or an array of strings");
}

}  // namespace

DatasetPatch load_patch(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing patch file: " + file.string());
  DatasetPatch patch;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("patch line " + std::to_string(number) + ": " + e.what());
    }
    if (!record.is_object()) throw DataError("patch line " + std::to_string(number) + ": not an object");
    PatchEntry entry;
    for (const auto& [key, value] : record.items()) {
      if (key == "match_tokens") {
        entry.match_tokens = token_field(value, key, number);
      } else if (key == "tokens") {
        entry.tokens = token_field(value, key, number);
      } else if (key == "slot_tags") {
        entry.slot_tags = token_field(value, key, number);
      } else if (key == "intent") {
        if (!value.is_string()) throw DataError("patch line " + std::to_string(number) + ": 'intent' must be a string");
        entry.intent = value.get<std::string>();
      } else if (key != "note") {
        throw DataError("patch line " + std::to_string(number) + ": unknown field '" + key + "'");
      }
    }
    if (entry.match_tokens.empty()) {
      throw DataError("patch line " + std::to_string(number) + ": missing 'match_tokens'");
    }
    patch.entries.push_back(std::move(entry));
  }
  return patch;
}

void save_patch(const DatasetPatch& patch, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write patch file " + file.string());
  for (const auto& entry : patch.entries) {
    json record;
    record["match_tokens"] = join_tokens(entry.match_tokens);
    if (entry.tokens) record["tokens"] = join_tokens(*entry.tokens);
    if (entry.intent) record["intent"] = *entry.intent;
    if (entry.slot_tags) record["slot_tags"] = join_tokens(*entry.slot_tags);
    out << record.dump() << '\n';
  }
}

PatchResult apply_patch(const Corpus& corpus, const DatasetPatch& patch) {
  std::multimap<std::string, std::size_t> index;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    index.emplace(join_tokens(corpus.utterances[i].tokens), i);
  }

  PatchResult result{corpus, {}};
  std::vector<std::string> problems;
  std::map<std::size_t, std::size_t> claimed;
  for (std::size_t e = 0; e < patch.entries.size(); ++e) {
    const auto& entry = patch.entries[e];
    const auto key = corpus.casing == Casing::uncased ? to_lower(join_tokens(entry.match_tokens))
                                                      : join_tokens(entry.match_tokens);
    const auto label = "entry " + std::to_string(e + 1) + " '" + key + "'";
    const auto count = index.count(key);
    if (count == 0) {
      problems.push_back(label + ": unmatched key");
      continue;
    }
    if (count > 1) {
      problems.push_back(label + ": ambiguous key matches " + std::to_string(count) + " utterances");
      continue;
    }
    const auto row = index.find(key)->second;
    if (auto [it, fresh] = claimed.emplace(row, e); !fresh) {
      problems.push_back(label + ": utterance already patched by entry " + std::to_string(it->second + 1));
      continue;
    }

    LabeledUtterance updated = corpus.utterances[row];
    if (entry.tokens) {
      updated.tokens = *entry.tokens;
      if (corpus.casing == Casing::uncased) {
        for (auto& token : updated.tokens) token = to_lower(token);
      }
    }
    if (entry.intent) updated.intent = *entry.intent;
    if (entry.slot_tags) updated.slot_tags = *entry.slot_tags;
    try {
      validate(updated);
    } catch (const DataError& err) {
      problems.push_back(label + ": " + err.what());
      continue;
    }

    const auto& original = corpus.utterances[row];
    const bool tokens_changed = updated.tokens != original.tokens;
    const bool intent_changed = updated.intent != original.intent;
    const bool slots_changed = updated.slot_tags != original.slot_tags;
    result.summary.tokens_changed += tokens_changed;
    result.summary.intents_changed += intent_changed;
    result.summary.slots_changed += slots_changed;
    result.summary.utterances_changed += tokens_changed || intent_changed || slots_changed;
    result.corpus.utterances[row] = std::move(updated);
  }

  if (!problems.empty()) {
    std::ostringstream message;
    message << problems.size() << " patch entr" << (problems.size() == 1 ? "y" : "ies") << " failed:";
    for (const auto& problem : problems) message << "\n  " << problem;
    throw DataError(message.str());
  }
  return result;
}

}  // namespace intentaug
