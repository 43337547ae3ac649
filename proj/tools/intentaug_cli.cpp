// intentaug: train, evaluate, predict, patch-dataset, report, synth.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "intentaug/config.hpp"
#include "intentaug/corpus.hpp"
#include "intentaug/error.hpp"
#include "intentaug/metrics.hpp"
#include "intentaug/pipeline.hpp"
#include "intentaug/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace intentaug;

namespace {

constexpr int kUserError = 1;
constexpr int kInternalError = 2;

void write_json(const json& j, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

std::string summary_line(const EvalReport& r) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << r.split << ": slot P " << r.slot_precision << " R " << r.slot_recall
    << " F1 " << r.slot_f1 << " | intent acc " << r.intent_accuracy << " | SFA " << r.semantic_frame_accuracy << " ("
    << r.sentences << " sentences)";
  return s.str();
}

int cmd_train(const fs::path& config_file, const std::string& out_override) {
  auto config = load_config(config_file);
  if (!out_override.empty()) config.output_dir = out_override;
  const auto casing = config.model.casing;
  auto train_split = load_corpus(config.data.root / config.data.train, config.data.train, casing);
  auto dev_split = load_corpus(config.data.root / config.data.dev, config.data.dev, casing);

  fs::create_directories(config.output_dir);
  std::ofstream log(config.output_dir / "train_log.jsonl");
  if (!log) throw Error("cannot write " + (config.output_dir / "train_log.jsonl").string());
  auto result = train(config, train_split, dev_split, &log);

  const json echo = config.to_json();
  save_checkpoint(*result.model, config.output_dir / "model", {{"config", echo}});

  auto dev = result.log[static_cast<std::size_t>(result.best_epoch)].dev;
  dev.config = echo;
  save_report(dev, config.output_dir / "dev_report.json");
  std::cout << "best epoch " << result.best_epoch << " | " << summary_line(dev) << '\n';

  const fs::path test_dir = config.data.root / config.data.test;
  if (fs::exists(test_dir / kTokensFile)) {
    auto report = evaluate_model(*result.model, load_corpus(test_dir, config.data.test, casing));
    report.name = config.name;
    report.config = echo;
    save_report(report, config.output_dir / "test_report.json");
    std::cout << summary_line(report) << '\n';
  }
  std::cout << "checkpoint: " << (config.output_dir / "model").string() << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& model_dir, const fs::path& data_dir, const std::string& split, fs::path out) {
  const json meta = load_checkpoint_metadata(model_dir);
  auto model = load_checkpoint(model_dir);
  auto corpus = load_corpus(data_dir / split, split, model->spec().casing);

  bool overlap = false;
  for (const auto& u : corpus.utterances) overlap = overlap || model->labels().has_intent(u.intent);
  if (!overlap) {
    throw DataError("vocabulary mismatch: none of the intents in " + (data_dir / split).string() +
                    " are known to the model");
  }

  auto report = evaluate_model(*model, corpus);
  json echo = meta.contains("extra") ? meta["extra"].value("config", json::object()) : json::object();
  report.name = echo.value("name", model_dir.filename().string());
  echo["evaluate"] = {{"model", model_dir.string()}, {"data", data_dir.string()}, {"split", split}};
  report.config = echo;
  if (out.empty()) out = model_dir / ("eval_" + split + ".json");
  save_report(report, out);
  std::cout << summary_line(report) << '\n';
  return 0;
}

int cmd_predict(const fs::path& model_dir, const fs::path& input, const fs::path& out_file) {
  auto model = load_checkpoint(model_dir);
  std::ifstream in(input);
  if (!in) throw Error("cannot read " + input.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.empty()) throw DataError("input file " + input.string() + " is empty");

  if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
  std::ofstream out(out_file);
  if (!out) throw Error("cannot write " + out_file.string());
  std::size_t failed = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto tokens = split_tokens(lines[i]);
    if (model->spec().casing == Casing::uncased) {
      for (auto& t : tokens) t = to_lower(t);
    }
    try {
      if (tokens.empty()) throw DataError("empty utterance");
      const auto record = model->predict(tokens);
      out << record.intent;
      for (std::size_t k = 0; k < record.tokens.size(); ++k) out << '\t' << record.tokens[k] << ':' << record.tags[k];
      out << '\n';
    } catch (const Error& e) {
      ++failed;
      out << '\n';
      std::cerr << "line " << i + 1 << ": " << e.what() << '\n';
    }
  }
  const json meta = load_checkpoint_metadata(model_dir);
  write_json({{"model", model_dir.string()},
              {"input", input.string()},
              {"lines", lines.size()},
              {"failed", failed},
              {"config", meta.contains("extra") ? meta["extra"].value("config", json::object()) : json::object()}},
             fs::path(out_file.string() + ".meta.json"));
  if (failed) {
    std::cerr << failed << " of " << lines.size() << " lines failed\n";
    return kUserError;
  }
  return 0;
}

int cmd_patch(const fs::path& patch_file, const fs::path& data_dir, const fs::path& out_dir) {
  const auto patch = load_patch(patch_file);
  // Keys are matched case-insensitively against an uncased corpus.
  const auto corpus = load_corpus(data_dir, data_dir.filename().string(), Casing::uncased);
  const auto result = apply_patch(corpus, patch);
  save_corpus(result.corpus, out_dir);
  const auto& s = result.summary;
  write_json({{"patch", patch_file.string()},
              {"data", data_dir.string()},
              {"entries", patch.entries.size()},
              {"utterances_changed", s.utterances_changed},
              {"tokens_changed", s.tokens_changed},
              {"intents_changed", s.intents_changed},
              {"slots_changed", s.slots_changed}},
             out_dir / "patch_summary.json");
  std::cout << "utterances changed " << s.utterances_changed << " (tokens " << s.tokens_changed << ", intents "
            << s.intents_changed << ", slots " << s.slots_changed << ")\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const fs::path& out) {
  std::vector<EvalReport> reports;
  for (const auto& run : runs) {
    fs::path file = run;
    if (fs::is_directory(file)) file /= "test_report.json";
    auto report = load_report(file);
    if (report.name.empty()) report.name = fs::path(run).filename().string();
    reports.push_back(std::move(report));
  }
  std::set<std::string> names;
  for (const auto& r : reports) {
    if (!names.insert(r.name).second) throw DataError("duplicate run name '" + r.name + "'");
  }
  std::sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) { return a.name < b.name; });

  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.name.size());
  std::ostringstream table;
  table << std::left << std::setw(static_cast<int>(width)) << "Method" << "  " << std::right << std::setw(10)
        << "Intent Acc" << std::setw(10) << "Sem. Acc" << std::setw(10) << "F1 Score" << '\n';
  json rows = json::array();
  for (const auto& r : reports) {
    table << std::left << std::setw(static_cast<int>(width)) << r.name << "  " << std::right << std::fixed
          << std::setprecision(2) << std::setw(10) << r.intent_accuracy << std::setw(10) << r.semantic_frame_accuracy
          << std::setw(10) << r.slot_f1 << '\n';
    rows.push_back({{"name", r.name},
                    {"split", r.split},
                    {"intent_accuracy", r.intent_accuracy},
                    {"semantic_frame_accuracy", r.semantic_frame_accuracy},
                    {"slot_f1", r.slot_f1},
                    {"config", r.config}});
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream text(out);
  if (!text) throw Error("cannot write " + out.string());
  text << table.str();
  auto json_out = out;
  json_out.replace_extension(".json");
  if (json_out == out) json_out += ".json";
  write_json({{"runs", rows}}, json_out);
  std::cout << table.str();
  return 0;
}

int cmd_synth(const fs::path& out, const SyntheticOptions& options) {
  const auto data = generate_synthetic(options);
  save_corpus(data.train, out / "train");
  save_corpus(data.dev, out / "dev");
  save_corpus(data.test, out / "test");
  const auto words = intent_dependent_words(data.train);
  std::cout << "wrote " << data.train.size() << "/" << data.dev.size() << "/" << data.test.size()
            << " utterances; " << filter_containing(data.test, words).size()
            << " test utterances contain intent-dependent words\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intent-augmented joint intent detection and slot filling"};
  app.require_subcommand(1);

  std::string config_file, out_override;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a YAML config");
  train_cmd->add_option("--config", config_file, "Experiment config")->required();
  train_cmd->add_option("--out", out_override, "Override output.dir");

  std::string model_dir, data_dir, split = "test", eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a corpus split");
  eval_cmd->add_option("--model", model_dir, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", data_dir, "Corpus root")->required();
  eval_cmd->add_option("--split", split, "Split subdirectory");
  eval_cmd->add_option("--out", eval_out, "Report file (default <model>/eval_<split>.json)");

  std::string input, predict_out;
  auto* predict_cmd = app.add_subcommand("predict", "Tag one utterance per line");
  predict_cmd->add_option("--model", model_dir, "Checkpoint directory")->required();
  predict_cmd->add_option("--input", input, "Input text file")->required();
  predict_cmd->add_option("--out", predict_out, "Output file")->required();

  std::string patch_file, patch_out;
  auto* patch_cmd = app.add_subcommand("patch-dataset", "Apply annotation corrections to a corpus split");
  patch_cmd->add_option("--patch", patch_file, "Patch file (JSON lines)")->required();
  patch_cmd->add_option("--data", data_dir, "Split directory")->required();
  patch_cmd->add_option("--out", patch_out, "Output directory")->required();

  std::vector<std::string> runs;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Tabulate evaluation reports");
  report_cmd->add_option("--runs", runs, "Run directories or report files")->required();
  report_cmd->add_option("--out", report_out, "Table file; a .json twin is written next to it")->required();

  SyntheticOptions synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic intent-dependent corpus");
  synth_cmd->add_option("--out", synth_out, "Output root")->required();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--train-size", synth.train_size);
  synth_cmd->add_option("--dev-size", synth.dev_size);
  synth_cmd->add_option("--test-size", synth.test_size);
  synth_cmd->add_option("--pairing-bias", synth.train_pairing_bias, "Share of train draws honouring the pairing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUserError;
  }

  try {
    if (*train_cmd) return cmd_train(config_file, out_override);
    if (*eval_cmd) return cmd_evaluate(model_dir, data_dir, split, eval_out);
    if (*predict_cmd) return cmd_predict(model_dir, input, predict_out);
    if (*patch_cmd) return cmd_patch(patch_file, data_dir, patch_out);
    if (*report_cmd) return cmd_report(runs, report_out);
    if (*synth_cmd) return cmd_synth(synth_out, synth);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kUserError;
}
