#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace intentaug {

struct SlotSpan {
  std::string label;
  int start = 0;  // inclusive token index
  int end = 0;    // exclusive

  auto operator<=>(const SlotSpan&) const = default;
};

// Maximal IOB spans. An I-x that does not continue an open x span starts a
// new span of label x (conlleval repair). Anything other than B-/I- is O.
std::vector<SlotSpan> extract_spans(std::span<const std::string> tags);

// Renders spans back into an IOB sequence of the given length.
std::vector<std::string> spans_to_tags(std::span<const SlotSpan> spans, int length);

struct LabelCounts {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

// Micro-averaged span scores, in percent.
struct SlotScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  LabelCounts total;
  std::map<std::string, LabelCounts> per_label;
};

SlotScores slot_f1(std::span<const std::vector<std::string>> gold, std::span<const std::vector<std::string>> pred);

// Intent plus per-token tags of one sentence.
struct Frame {
  std::string intent;
  std::vector<std::string> tags;
};

// Percent of sentences whose intent and every token tag are both correct.
double semantic_frame_accuracy(std::span<const Frame> gold, std::span<const Frame> pred);
double intent_accuracy(std::span<const Frame> gold, std::span<const Frame> pred);

struct EvalReport {
  std::string name;
  std::string split;
  std::size_t sentences = 0;
  double slot_precision = 0;
  double slot_recall = 0;
  double slot_f1 = 0;
  double intent_accuracy = 0;
  double semantic_frame_accuracy = 0;
  double slot_exact_match = 0;  // sentences with every tag right, percent
  std::map<std::string, LabelCounts> per_label;
  nlohmann::json config;  // echo of the producing configuration

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

EvalReport evaluate(std::span<const Frame> gold, std::span<const Frame> pred);

void save_report(const EvalReport& report, const std::filesystem::path& file);
EvalReport load_report(const std::filesystem::path& file);

}  // namespace intentaug
