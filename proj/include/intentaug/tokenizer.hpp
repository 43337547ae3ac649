#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace intentaug {

// A subword produced from one input word.
struct SubwordPiece {
  int id = 0;
  std::string text;  // vocabulary entry, continuation pieces keep their "##" marker
  int word = 0;      // index of the source word in the encode() input
};

// Subword tokenizer contract used by the aligner. Any scheme works as long
// as every input word yields at least one piece and pieces come back in word
// order.
class SubwordTokenizer {
 public:
  virtual ~SubwordTokenizer() = default;

  virtual std::vector<SubwordPiece> encode(std::span<const std::string> words) const = 0;
  virtual std::string decode(std::span<const int> ids) const = 0;

  virtual int token_id(std::string_view token) const = 0;
  virtual const std::string& token(int id) const = 0;
  virtual int vocab_size() const = 0;

  virtual int cls_id() const = 0;
  virtual int sep_id() const = 0;
  virtual int pad_id() const = 0;
  virtual int unk_id() const = 0;
};

// Greedy longest-match-first WordPiece over a line-per-entry vocabulary
// file, with BERT-style punctuation splitting inside each word.
class WordPieceTokenizer final : public SubwordTokenizer {
 public:
  static constexpr std::string_view kContinuation = "##";

  WordPieceTokenizer(std::vector<std::string> vocab, bool lowercase);

  static WordPieceTokenizer from_file(const std::filesystem::path& vocab_file, bool lowercase);
  void save(const std::filesystem::path& vocab_file) const;

  std::vector<SubwordPiece> encode(std::span<const std::string> words) const override;
  std::string decode(std::span<const int> ids) const override;

  int token_id(std::string_view token) const override;
  const std::string& token(int id) const override;
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }

  int cls_id() const override { return cls_; }
  int sep_id() const override { return sep_; }
  int pad_id() const override { return pad_; }
  int unk_id() const override { return unk_; }

  bool lowercase() const { return lowercase_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  // Pieces for one pre-split word, without the word index.
  std::vector<std::string> wordpiece(std::string_view word) const;

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  bool lowercase_;
  int pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0;
  std::size_t max_chars_per_word_ = 100;
};

// Builds a WordPiece vocabulary for training from scratch: special tokens,
// every word seen at least `min_count` times, and every single character
// both as a word-initial and as a continuation piece so no word maps to
// [UNK].
std::vector<std::string> build_wordpiece_vocab(std::span<const std::vector<std::string>> sentences,
                                               bool lowercase, int min_count = 1);

}  // namespace intentaug
