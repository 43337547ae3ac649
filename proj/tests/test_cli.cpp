#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"

namespace fs = std::filesystem;
using testing_support::TempDir;

namespace {

// Runs the CLI with stdout/stderr captured to files in `tmp`; returns the
// exit status.
int run(const TempDir& tmp, const std::string& args) {
  const std::string cmd = std::string("\"") + CLI_PATH + "\" " + args + " >\"" + (tmp / "stdout.txt").string() +
                          "\" 2>\"" + (tmp / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// Shared trained checkpoint: synth + train once.
struct Trained {
  TempDir tmp{"cli_run"};
  int synth_status = -1;
  int train_status = -1;

  Trained() {
    synth_status = run(tmp, "synth --out " + q(tmp / "data") + " --train-size 96 --dev-size 24 --test-size 24");
    std::ofstream(tmp / "config.yaml") << "name: cli-run\n"
                                          "seed: 2\n"
                                          "data:\n  root: data\n"
                                          "encoder:\n  hidden_size: 16\n  num_layers: 1\n  intermediate_size: 32\n"
                                          "training:\n  epochs: 1\n  learning_rate: 1.0e-3\n"
                                          "output:\n  dir: run\n";
    train_status = run(tmp, "train --config " + q(tmp / "config.yaml"));
  }
  fs::path model() const { return tmp / "run" / "model"; }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

}  // namespace

TEST_CASE("synth and train produce a run directory") {
  const auto& t = trained();
  REQUIRE(t.synth_status == 0);
  REQUIRE(t.train_status == 0);
  for (const auto* f : {"train_log.jsonl", "dev_report.json", "test_report.json", "model/metadata.json",
                        "model/vocab.txt", "model/weights.bin"}) {
    CHECK(fs::exists(t.tmp / "run" / f));
  }
  CHECK(lines_of(t.tmp / "run" / "train_log.jsonl").size() == 2);
  const auto report = nlohmann::json::parse(slurp(t.tmp / "run" / "test_report.json"));
  CHECK(report["name"] == "cli-run");
  CHECK(report["config"]["seed"] == 2);
}

TEST_CASE("train with a missing or invalid config exits 1") {
  TempDir tmp("cli_cfg");
  CHECK(run(tmp, "train --config " + q(tmp / "missing.yaml")) == 1);
  std::ofstream(tmp / "bad.yaml") << "name: x\ndata:\n  root: .\ntraining:\n  epochs: -1\n";
  CHECK(run(tmp, "train --config " + q(tmp / "bad.yaml")) == 1);
  CHECK(slurp(tmp / "stderr.txt").find("training.epochs") != std::string::npos);
}

TEST_CASE("usage errors exit 1, help exits 0") {
  TempDir tmp("cli_usage");
  CHECK(run(tmp, "") == 1);
  CHECK(run(tmp, "frobnicate") == 1);
  CHECK(run(tmp, "predict --model x") == 1);
  CHECK(run(tmp, "--help") == 0);
}

TEST_CASE("predict writes one line per input line") {
  const auto& t = trained();
  REQUIRE(t.train_status == 0);
  TempDir tmp("cli_predict");
  std::ofstream(tmp / "in.txt") << "book a flight to boston\nwhat is the weather in denver tomorrow\nfind a hotel\n";
  REQUIRE(run(tmp, "predict --model " + q(t.model()) + " --input " + q(tmp / "in.txt") + " --out " +
                       q(tmp / "out.tsv")) == 0);
  const auto out = lines_of(tmp / "out.tsv");
  REQUIRE(out.size() == 3);
  CHECK(out[0].find("\tbook:") != std::string::npos);
  CHECK(std::count(out[1].begin(), out[1].end(), '\t') == 7);
  CHECK(fs::exists(tmp / "out.tsv.meta.json"));

  SUBCASE("a blank line fails alone") {
    std::ofstream(tmp / "gap.txt") << "book a flight\n\nfind a hotel\n";
    CHECK(run(tmp, "predict --model " + q(t.model()) + " --input " + q(tmp / "gap.txt") + " --out " +
                       q(tmp / "gap.tsv")) == 1);
    const auto gap = lines_of(tmp / "gap.tsv");
    REQUIRE(gap.size() == 3);
    CHECK(gap[1].empty());
    CHECK_FALSE(gap[2].empty());
    CHECK(slurp(tmp / "stderr.txt").find("line 2") != std::string::npos);
  }
  SUBCASE("empty input") {
    std::ofstream(tmp / "empty.txt").flush();
    CHECK(run(tmp, "predict --model " + q(t.model()) + " --input " + q(tmp / "empty.txt") + " --out " +
                       q(tmp / "e.tsv")) == 1);
  }
  SUBCASE("missing checkpoint") {
    CHECK(run(tmp, "predict --model " + q(tmp / "nope") + " --input " + q(tmp / "in.txt") + " --out " +
                       q(tmp / "x.tsv")) == 1);
  }
}

TEST_CASE("evaluate scores a split and rejects foreign label sets") {
  const auto& t = trained();
  REQUIRE(t.train_status == 0);
  TempDir tmp("cli_eval");
  REQUIRE(run(tmp, "evaluate --model " + q(t.model()) + " --data " + q(t.tmp / "data") + " --split test --out " +
                       q(tmp / "eval.json")) == 0);
  const auto report = nlohmann::json::parse(slurp(tmp / "eval.json"));
  CHECK(report["sentences"] == 24);
  CHECK(report["split"] == "test");

  fs::create_directories(tmp / "atis");
  fs::copy(fs::path(TEST_DATA_DIR) / "atis_mini", tmp / "atis" / "test");
  CHECK(run(tmp, "evaluate --model " + q(t.model()) + " --data " + q(tmp / "atis")) == 1);
  CHECK(slurp(tmp / "stderr.txt").find("vocabulary mismatch") != std::string::npos);
}

TEST_CASE("patch-dataset") {
  TempDir tmp("cli_patch");
  const fs::path patch = fs::path(REPO_DIR) / "data" / "patches" / "snips_test_uncased.jsonl";
  SUBCASE("fixture") {
    REQUIRE(run(tmp, "patch-dataset --patch " + q(patch) + " --data " +
                         q(fs::path(TEST_DATA_DIR) / "snips_test_fixture") + " --out " + q(tmp / "out")) == 0);
    const auto summary = nlohmann::json::parse(slurp(tmp / "out" / "patch_summary.json"));
    CHECK(summary["utterances_changed"] == 26);
    CHECK(slurp(tmp / "stdout.txt").find("utterances changed 26") != std::string::npos);
  }
  SUBCASE("wrong corpus") {
    CHECK(run(tmp, "patch-dataset --patch " + q(patch) + " --data " + q(fs::path(TEST_DATA_DIR) / "atis_mini") +
                       " --out " + q(tmp / "out")) == 1);
    CHECK(slurp(tmp / "stderr.txt").find("unmatched key") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp / "out"));
  }
  SUBCASE("empty patch") {
    std::ofstream(tmp / "empty.jsonl").flush();
    CHECK(run(tmp, "patch-dataset --patch " + q(tmp / "empty.jsonl") + " --data " +
                       q(fs::path(TEST_DATA_DIR) / "atis_mini") + " --out " + q(tmp / "out")) == 0);
    CHECK(slurp(tmp / "out" / "seq.in") == slurp(fs::path(TEST_DATA_DIR) / "atis_mini" / "seq.in"));
  }
}

TEST_CASE("report tabulates runs and rejects duplicate names") {
  TempDir tmp("cli_report");
  auto write = [&](const std::string& dir, const std::string& name, double f1) {
    fs::create_directories(tmp / dir);
    nlohmann::json r = {{"name", name},           {"split", "test"},         {"sentences", 10},
                        {"slot_precision", f1},   {"slot_recall", f1},       {"slot_f1", f1},
                        {"intent_accuracy", 90.0}, {"semantic_frame_accuracy", 80.0}};
    std::ofstream(tmp / dir / "test_report.json") << r.dump();
  };
  write("b", "zeta", 91.5);
  write("a", "alpha", 88.25);
  write("c", "alpha", 70.0);

  REQUIRE(run(tmp, "report --runs " + q(tmp / "b") + " " + q(tmp / "a") + " --out " + q(tmp / "table.txt")) == 0);
  const auto table = lines_of(tmp / "table.txt");
  REQUIRE(table.size() == 3);
  CHECK(table[1].find("alpha") == 0);
  CHECK(table[1].find("88.25") != std::string::npos);
  CHECK(table[2].find("zeta") == 0);
  CHECK(nlohmann::json::parse(slurp(tmp / "table.json"))["runs"].size() == 2);

  CHECK(run(tmp, "report --runs " + q(tmp / "a") + " " + q(tmp / "c") + " --out " + q(tmp / "t2.txt")) == 1);
  CHECK(slurp(tmp / "stderr.txt").find("duplicate run name") != std::string::npos);
  CHECK(run(tmp, "report --runs " + q(tmp / "missing") + " --out " + q(tmp / "t3.txt")) == 1);
}
