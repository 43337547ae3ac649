#include "intentaug/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include "intentaug/corpus.hpp"
#include "intentaug/error.hpp"

namespace intentaug {

std::vector<SlotSpan> extract_spans(std::span<const std::string> tags) {
  std::vector<SlotSpan> spans;
  std::optional<SlotSpan> open;
  auto close = [&](int at) {
    if (open) {
      open->end = at;
      spans.push_back(std::move(*open));
      open.reset();
    }
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const auto& tag = tags[static_cast<std::size_t>(i)];
    const bool begin = tag.size() > 2 && tag[0] == 'B' && tag[1] == '-';
    const bool inside = tag.size() > 2 && tag[0] == 'I' && tag[1] == '-';
    if (!begin && !inside) {
      close(i);
      continue;
    }
    const auto label = tag.substr(2);
    if (inside && open && open->label == label) continue;
    close(i);
    open = SlotSpan{label, i, i + 1};
  }
  close(static_cast<int>(tags.size()));
  return spans;
}

std::vector<std::string> spans_to_tags(std::span<const SlotSpan> spans, int length) {
  std::vector<std::string> tags(static_cast<std::size_t>(length), "O");
  for (const auto& span : spans) {
    for (int i = span.start; i < span.end; ++i) {
      tags[static_cast<std::size_t>(i)] = (i == span.start ? "B-" : "I-") + span.label;
    }
  }
  return tags;
}

namespace {

double percent(std::size_t numerator, std::size_t denominator) {
  return denominator == 0 ? 0.0 : 100.0 * static_cast<double>(numerator) / static_cast<double>(denominator);
}

void check_lengths(std::size_t gold, std::size_t pred, const char* what) {
  if (gold != pred) {
    throw DataError(std::string(what) + ": " + std::to_string(gold) + " gold vs " + std::to_string(pred) +
                    " predicted sentences");
  }
}

bool intent_correct(const Frame& gold, const Frame& pred) {
  return pred.intent == gold.intent && pred.intent != LabelVocabulary::kUnknown;
}

}  // namespace

SlotScores slot_f1(std::span<const std::vector<std::string>> gold, std::span<const std::vector<std::string>> pred) {
  check_lengths(gold.size(), pred.size(), "slot F1");
  SlotScores scores;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      throw DataError("slot F1: sentence " + std::to_string(s) + " has " + std::to_string(gold[s].size()) +
                      " gold tags but " + std::to_string(pred[s].size()) + " predicted");
    }
    auto gold_spans = extract_spans(gold[s]);
    auto pred_spans = extract_spans(pred[s]);
    std::sort(gold_spans.begin(), gold_spans.end());
    std::sort(pred_spans.begin(), pred_spans.end());
    std::size_t g = 0, p = 0;
    while (g < gold_spans.size() || p < pred_spans.size()) {
      if (p == pred_spans.size() || (g < gold_spans.size() && gold_spans[g] < pred_spans[p])) {
        ++scores.per_label[gold_spans[g++].label].false_negatives;
      } else if (g == gold_spans.size() || pred_spans[p] < gold_spans[g]) {
        ++scores.per_label[pred_spans[p++].label].false_positives;
      } else {
        ++scores.per_label[gold_spans[g].label].true_positives;
        ++g;
        ++p;
      }
    }
  }
  for (const auto& [label, counts] : scores.per_label) {
    scores.total.true_positives += counts.true_positives;
    scores.total.false_positives += counts.false_positives;
    scores.total.false_negatives += counts.false_negatives;
  }
  const auto tp = scores.total.true_positives;
  scores.precision = percent(tp, tp + scores.total.false_positives);
  scores.recall = percent(tp, tp + scores.total.false_negatives);
  scores.f1 = scores.precision + scores.recall > 0
                  ? 2 * scores.precision * scores.recall / (scores.precision + scores.recall)
                  : 0.0;
  return scores;
}

double semantic_frame_accuracy(std::span<const Frame> gold, std::span<const Frame> pred) {
  check_lengths(gold.size(), pred.size(), "semantic frame accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    correct += intent_correct(gold[i], pred[i]) && gold[i].tags == pred[i].tags;
  }
  return percent(correct, gold.size());
}

double intent_accuracy(std::span<const Frame> gold, std::span<const Frame> pred) {
  check_lengths(gold.size(), pred.size(), "intent accuracy");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += intent_correct(gold[i], pred[i]);
  return percent(correct, gold.size());
}

EvalReport evaluate(std::span<const Frame> gold, std::span<const Frame> pred) {
  check_lengths(gold.size(), pred.size(), "evaluate");
  std::vector<std::vector<std::string>> gold_tags, pred_tags;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    gold_tags.push_back(gold[i].tags);
    pred_tags.push_back(pred[i].tags);
    exact += gold[i].tags == pred[i].tags;
  }
  const auto scores = slot_f1(gold_tags, pred_tags);
  EvalReport report;
  report.sentences = gold.size();
  report.slot_precision = scores.precision;
  report.slot_recall = scores.recall;
  report.slot_f1 = scores.f1;
  report.per_label = scores.per_label;
  report.intent_accuracy = intent_accuracy(gold, pred);
  report.semantic_frame_accuracy = semantic_frame_accuracy(gold, pred);
  report.slot_exact_match = percent(exact, gold.size());
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [label, counts] : per_label) {
    labels[label] = {{"tp", counts.true_positives}, {"fp", counts.false_positives}, {"fn", counts.false_negatives}};
  }
  return {{"name", name},
          {"split", split},
          {"sentences", sentences},
          {"slot_precision", slot_precision},
          {"slot_recall", slot_recall},
          {"slot_f1", slot_f1},
          {"intent_accuracy", intent_accuracy},
          {"semantic_frame_accuracy", semantic_frame_accuracy},
          {"slot_exact_match", slot_exact_match},
          {"per_label", labels},
          {"config", config}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport report;
  try {
    report.name = j.at("name").get<std::string>();
    report.split = j.value("split", "");
    report.sentences = j.at("sentences").get<std::size_t>();
    report.slot_precision = j.at("slot_precision").get<double>();
    report.slot_recall = j.at("slot_recall").get<double>();
    report.slot_f1 = j.at("slot_f1").get<double>();
    report.intent_accuracy = j.at("intent_accuracy").get<double>();
    report.semantic_frame_accuracy = j.at("semantic_frame_accuracy").get<double>();
    report.slot_exact_match = j.value("slot_exact_match", 0.0);
    if (j.contains("per_label")) {
      for (const auto& [label, counts] : j.at("per_label").items()) {
        report.per_label[label] = {counts.at("tp").get<std::size_t>(), counts.at("fp").get<std::size_t>(),
                                   counts.at("fn").get<std::size_t>()};
      }
    }
    report.config = j.value("config", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed eval report: ") + e.what());
  }
  return report;
}

void save_report(const EvalReport& report, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write report " + file.string());
  out << report.to_json().dump(2) << '\n';
}

EvalReport load_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("missing report file: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed eval report " + file.string() + ": " + e.what());
  }
  return EvalReport::from_json(j);
}

}  // namespace intentaug
