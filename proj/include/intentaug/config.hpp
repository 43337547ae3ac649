#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "intentaug/model.hpp"

namespace intentaug {

struct DataConfig {
  std::filesystem::path root;  // directory holding one subdirectory per split
  std::string train = "train";
  std::string dev = "dev";
  std::string test = "test";
};

struct TrainingConfig {
  int epochs = 10;
  double learning_rate = 5e-5;
  double warmup_ratio = 0.1;
  double weight_decay = 0.0;
  double max_grad_norm = 1.0;
  int train_batch_size = 32;
  int eval_batch_size = 64;
};

struct ExperimentConfig {
  std::string name = "run";
  std::uint64_t seed = 1234;
  DataConfig data;
  ModelSpec model;
  IntentSource train_intent_source = IntentSource::gold;
  TrainingConfig training;
  std::filesystem::path output_dir;

  void validate() const;
  nlohmann::json to_json() const;
};

// Environment variable consulted when `data.root` is absent.
inline constexpr const char* kDataRootEnv = "INTENTAUG_DATA_ROOT";

// Parses a YAML experiment file. Relative paths resolve against the file's
// directory. Unknown keys and invalid values raise ConfigError naming the
// offending field.
ExperimentConfig load_config(const std::filesystem::path& file);
ExperimentConfig parse_config(const std::string& yaml, const std::filesystem::path& base_dir);

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace intentaug
