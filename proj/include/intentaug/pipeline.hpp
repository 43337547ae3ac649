#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "intentaug/config.hpp"
#include "intentaug/corpus.hpp"
#include "intentaug/metrics.hpp"
#include "intentaug/model.hpp"

namespace intentaug {

// The pipeline trains and serves 64-bit models.
using Model = JointModel<double>;

struct EpochLog {
  int epoch = 0;            // 0 is the untrained model
  double train_loss = 0;    // mean per-example loss, 0 for epoch 0
  EvalReport dev;
  bool best = false;

  nlohmann::json to_json() const;
};

struct TrainingResult {
  std::unique_ptr<Model> model;  // the best-dev checkpoint
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

// Builds the tokenizer and label vocabularies from the training split and
// returns an initialized (untrained) model.
std::unique_ptr<Model> build_model(const ExperimentConfig& config, const Corpus& train);

// Trains for the configured number of epochs and keeps the epoch with the
// highest dev slot F1 (earliest on ties; epoch 0 included). Each epoch
// record is also written as one JSON line to `log` when given.
TrainingResult train(const ExperimentConfig& config, const Corpus& train_split, const Corpus& dev_split,
                     std::ostream* log = nullptr);

std::vector<PredictionRecord> infer(const Model& model, std::span<const std::vector<std::string>> utterances);

// Runs inference over the corpus and scores it against its gold labels.
EvalReport evaluate_model(const Model& model, const Corpus& corpus);

inline constexpr int kCheckpointVersion = 1;

// Writes `metadata.json`, `vocab.txt` and `weights.bin` into `dir`.
void save_checkpoint(Model& model, const std::filesystem::path& dir, const nlohmann::json& extra = {});

// Constraints a caller can place on a checkpoint before using it.
struct CheckpointExpectations {
  std::optional<int> num_intents;
  std::optional<int> num_slots;
  std::optional<FusionConfig> fusion;
};

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& dir, const CheckpointExpectations& expect = {});
nlohmann::json load_checkpoint_metadata(const std::filesystem::path& dir);

}  // namespace intentaug
