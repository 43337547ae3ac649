#include "intentaug/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "intentaug/corpus.hpp"
#include "intentaug/error.hpp"

namespace intentaug {

namespace {

constexpr std::string_view kPad = "[PAD]";
constexpr std::string_view kUnk = "[UNK]";
constexpr std::string_view kCls = "[CLS]";
constexpr std::string_view kSep = "[SEP]";
constexpr std::string_view kMask = "[MASK]";

bool is_punctuation(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

// Splits ASCII punctuation into standalone pieces: "what's" -> what ' s.
std::vector<std::string> split_punctuation(std::string_view word) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : word) {
    if (is_punctuation(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current += static_cast<char>(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

// Length in bytes of the UTF-8 sequence starting with `lead`.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

int require(const std::unordered_map<std::string, int>& ids, std::string_view token) {
  auto it = ids.find(std::string(token));
  if (it == ids.end()) throw DataError("vocabulary lacks special token " + std::string(token));
  return it->second;
}

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase)
    : vocab_(std::move(vocab)), lowercase_(lowercase) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<int>(i));
  pad_ = require(ids_, kPad);
  unk_ = require(ids_, kUnk);
  cls_ = require(ids_, kCls);
  sep_ = require(ids_, kSep);
}

WordPieceTokenizer WordPieceTokenizer::from_file(const std::filesystem::path& vocab_file, bool lowercase) {
  std::ifstream in(vocab_file, std::ios::binary);
  if (!in) throw DataError("missing vocabulary file: " + vocab_file.string());
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab), lowercase);
}

void WordPieceTokenizer::save(const std::filesystem::path& vocab_file) const {
  std::ofstream out(vocab_file, std::ios::binary);
  if (!out) throw Error("cannot write " + vocab_file.string());
  for (const auto& entry : vocab_) out << entry << '\n';
}

std::vector<std::string> WordPieceTokenizer::wordpiece(std::string_view word) const {
  const std::string text = lowercase_ ? to_lower(word) : std::string(word);
  if (text.size() > max_chars_per_word_) return {std::string(kUnk)};

  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.size();
    std::string match;
    while (start < end) {
      std::string candidate = text.substr(start, end - start);
      if (start > 0) candidate.insert(0, kContinuation);
      if (ids_.count(candidate)) {
        match = std::move(candidate);
        break;
      }
      // Step back one whole UTF-8 character.
      std::size_t back = end - 1;
      while (back > start && (static_cast<unsigned char>(text[back]) & 0xC0) == 0x80) --back;
      end = back;
    }
    if (match.empty()) return {std::string(kUnk)};
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

std::vector<SubwordPiece> WordPieceTokenizer::encode(std::span<const std::string> words) const {
  std::vector<SubwordPiece> out;
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (const auto& chunk : split_punctuation(words[w])) {
      for (auto& piece : wordpiece(chunk)) {
        const int id = token_id(piece);
        out.push_back({id, std::move(piece), static_cast<int>(w)});
      }
    }
  }
  return out;
}

std::string WordPieceTokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    const auto& piece = token(id);
    if (piece.starts_with(kContinuation)) {
      out += piece.substr(kContinuation.size());
    } else {
      if (!out.empty()) out += ' ';
      out += piece;
    }
  }
  return out;
}

int WordPieceTokenizer::token_id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? unk_ : it->second;
}

const std::string& WordPieceTokenizer::token(int id) const {
  if (id < 0 || id >= vocab_size()) throw DimensionError("token id " + std::to_string(id) + " out of range");
  return vocab_[static_cast<std::size_t>(id)];
}

std::vector<std::string> build_wordpiece_vocab(std::span<const std::vector<std::string>> sentences,
                                               bool lowercase, int min_count) {
  std::map<std::string, int> counts;
  std::set<std::string> characters;
  for (const auto& sentence : sentences) {
    for (const auto& word : sentence) {
      for (const auto& chunk : split_punctuation(lowercase ? to_lower(word) : word)) {
        ++counts[chunk];
        for (std::size_t i = 0; i < chunk.size();) {
          const auto n = std::min(utf8_length(static_cast<unsigned char>(chunk[i])), chunk.size() - i);
          characters.insert(chunk.substr(i, n));
          i += n;
        }
      }
    }
  }

  std::vector<std::string> vocab{std::string(kPad), std::string(kUnk), std::string(kCls),
                                 std::string(kSep), std::string(kMask)};
  std::set<std::string> present(vocab.begin(), vocab.end());
  auto add = [&](std::string entry) {
    if (present.insert(entry).second) vocab.push_back(std::move(entry));
  };
  for (const auto& c : characters) add(c);
  for (const auto& c : characters) add(std::string(WordPieceTokenizer::kContinuation) + c);
  for (const auto& [word, count] : counts) {
    if (count >= min_count) add(word);
  }
  return vocab;
}

}  // namespace intentaug
