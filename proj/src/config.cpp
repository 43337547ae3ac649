#include "intentaug/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace intentaug {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Reads a mapping and rejects keys outside `allowed`.
class Section {
 public:
  Section(const YAML::Node& node, std::string path, std::set<std::string> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_) return;
    if (!node_.IsMap()) throw ConfigError(label() + " must be a mapping");
    for (const auto& item : node_) {
      const auto key = item.first.as<std::string>();
      if (!allowed.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) const {
    if (!node_ || !node_[key]) return;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("config field '" + qualified(key) + "' has the wrong type");
    }
  }

  YAML::Node child(const std::string& key) const { return node_ ? node_[key] : YAML::Node(); }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string label() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

  YAML::Node node_;
  std::string path_;
};

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return p.is_absolute() || text.empty() ? p : (base / p).lexically_normal();
}

}  // namespace

void ExperimentConfig::validate() const {
  auto positive = [](double value, const std::string& field) {
    if (!(value > 0)) {
      std::ostringstream msg;
      msg << "config field '" << field << "' must be positive (got " << value << ")";
      throw ConfigError(msg.str());
    }
  };
  positive(training.epochs, "training.epochs");
  positive(training.learning_rate, "training.learning_rate");
  positive(training.train_batch_size, "training.train_batch_size");
  positive(training.eval_batch_size, "training.eval_batch_size");
  positive(training.max_grad_norm, "training.max_grad_norm");
  positive(model.max_len, "training.max_len");
  if (training.warmup_ratio < 0 || training.warmup_ratio >= 1) {
    throw ConfigError("config field 'training.warmup_ratio' must be in [0, 1)");
  }
  if (training.weight_decay < 0) throw ConfigError("config field 'training.weight_decay' must be >= 0");
  if (model.encoder.pretrained.empty()) {
    positive(model.encoder.hidden_size, "encoder.hidden_size");
    positive(model.encoder.num_layers, "encoder.num_layers");
    positive(model.encoder.num_attention_heads, "encoder.num_attention_heads");
    positive(model.encoder.intermediate_size, "encoder.intermediate_size");
    positive(model.encoder.max_sequence_length, "encoder.max_sequence_length");
    if (model.encoder.hidden_size % model.encoder.num_attention_heads != 0) {
      throw ConfigError("config field 'encoder.hidden_size' must be divisible by 'encoder.num_attention_heads'");
    }
    if (model.max_len > model.encoder.max_sequence_length) {
      throw ConfigError("config field 'training.max_len' exceeds 'encoder.max_sequence_length'");
    }
  }
  if (model.encoder.dropout < 0 || model.encoder.dropout >= 1) {
    throw ConfigError("config field 'encoder.dropout' must be in [0, 1)");
  }
  if (model.head_dropout < 0 || model.head_dropout >= 1) {
    throw ConfigError("config field 'training.dropout' must be in [0, 1)");
  }
  if (!model.augment && model.fusion.method != FusionMethod::none) {
    throw ConfigError("config field 'fusion.method' requires 'augment.enabled: true'");
  }
  if (model.separator.empty()) throw ConfigError("config field 'augment.separator' must not be empty");
}

ExperimentConfig parse_config(const std::string& yaml, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("config is empty");

  ExperimentConfig config;
  Section top(root, "", {"name", "seed", "data", "encoder", "fusion", "augment", "training", "output"});
  top.read("name", config.name);
  {
    long long seed = static_cast<long long>(config.seed);
    top.read("seed", seed);
    if (seed < 0) throw ConfigError("config field 'seed' must be non-negative");
    config.seed = static_cast<std::uint64_t>(seed);
  }

  Section data(top.child("data"), "data", {"root", "train", "dev", "test", "casing"});
  std::string root_dir;
  data.read("root", root_dir);
  if (root_dir.empty()) {
    if (const char* env = std::getenv(kDataRootEnv)) root_dir = env;
  }
  if (root_dir.empty()) {
    throw ConfigError(std::string("config field 'data.root' is required (or set ") + kDataRootEnv + ")");
  }
  config.data.root = resolve(base_dir, root_dir);
  data.read("train", config.data.train);
  data.read("dev", config.data.dev);
  data.read("test", config.data.test);
  std::string casing = "uncased";
  data.read("casing", casing);
  try {
    config.model.casing = parse_casing(casing);
  } catch (const ConfigError&) {
    throw ConfigError("config field 'data.casing' must be 'cased' or 'uncased'");
  }

  auto& enc = config.model.encoder;
  Section encoder(top.child("encoder"), "encoder",
                  {"pretrained", "hidden_size", "num_layers", "num_attention_heads", "intermediate_size",
                   "max_sequence_length", "dropout", "attention_dropout", "layer_norm_eps",
                   "initializer_range"});
  std::string pretrained;
  encoder.read("pretrained", pretrained);
  if (!pretrained.empty()) enc.pretrained = resolve(base_dir, pretrained).string();
  encoder.read("hidden_size", enc.hidden_size);
  encoder.read("num_layers", enc.num_layers);
  encoder.read("num_attention_heads", enc.num_attention_heads);
  encoder.read("intermediate_size", enc.intermediate_size);
  encoder.read("max_sequence_length", enc.max_sequence_length);
  encoder.read("dropout", enc.dropout);
  enc.attention_dropout = enc.dropout;
  encoder.read("attention_dropout", enc.attention_dropout);
  encoder.read("layer_norm_eps", enc.layer_norm_eps);
  encoder.read("initializer_range", enc.initializer_range);

  auto& fusion = config.model.fusion;
  Section fusion_node(top.child("fusion"), "fusion",
                      {"method", "reduction", "q", "transform_activation", "use_crf", "crf_constraints"});
  std::string method = "concat", reduction = "sum", activation = "tanh";
  double q = 1.0;
  fusion_node.read("method", method);
  fusion_node.read("reduction", reduction);
  fusion_node.read("q", q);
  fusion_node.read("transform_activation", activation);
  fusion_node.read("use_crf", fusion.use_crf);
  fusion_node.read("crf_constraints", fusion.crf_constraints);
  fusion.method = parse_fusion_method(method);
  fusion.reduction = parse_reduction(reduction, q);
  fusion.transform_activation = parse_activation(activation);

  Section augment(top.child("augment"), "augment", {"enabled", "intent_rendering", "separator", "train_intent_source"});
  augment.read("enabled", config.model.augment);
  std::string rendering = "raw", source = "gold";
  augment.read("intent_rendering", rendering);
  augment.read("separator", config.model.separator);
  augment.read("train_intent_source", source);
  config.model.rendering = parse_render_mode(rendering);
  if (source == "gold") {
    config.train_intent_source = IntentSource::gold;
  } else if (source == "predicted") {
    config.train_intent_source = IntentSource::predicted;
  } else {
    throw ConfigError("config field 'augment.train_intent_source' must be 'gold' or 'predicted'");
  }

  auto& tr = config.training;
  Section training(top.child("training"), "training",
                   {"epochs", "learning_rate", "warmup_ratio", "weight_decay", "max_grad_norm", "train_batch_size",
                    "eval_batch_size", "dropout", "max_len"});
  training.read("epochs", tr.epochs);
  training.read("learning_rate", tr.learning_rate);
  training.read("warmup_ratio", tr.warmup_ratio);
  training.read("weight_decay", tr.weight_decay);
  training.read("max_grad_norm", tr.max_grad_norm);
  training.read("train_batch_size", tr.train_batch_size);
  training.read("eval_batch_size", tr.eval_batch_size);
  training.read("dropout", config.model.head_dropout);
  training.read("max_len", config.model.max_len);

  Section output(top.child("output"), "output", {"dir"});
  std::string out_dir = "runs/" + config.name;
  output.read("dir", out_dir);
  config.output_dir = resolve(base_dir, out_dir);

  config.validate();
  return config;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), file.has_parent_path() ? file.parent_path() : fs::path("."));
}

json model_spec_to_json(const ModelSpec& spec) {
  const auto& e = spec.encoder;
  return {{"encoder",
           {{"vocab_size", e.vocab_size},
            {"hidden_size", e.hidden_size},
            {"num_layers", e.num_layers},
            {"num_attention_heads", e.num_attention_heads},
            {"intermediate_size", e.intermediate_size},
            {"max_sequence_length", e.max_sequence_length},
            {"type_vocab_size", e.type_vocab_size},
            {"dropout", e.dropout},
            {"attention_dropout", e.attention_dropout},
            {"layer_norm_eps", e.layer_norm_eps},
            {"initializer_range", e.initializer_range},
            {"pooler", e.pooler},
            {"pretrained", e.pretrained}}},
          {"fusion",
           {{"method", to_string(spec.fusion.method)},
            {"reduction", spec.fusion.reduction.kind == ReductionSpec::Kind::sum    ? "sum"
                          : spec.fusion.reduction.kind == ReductionSpec::Kind::mean ? "mean"
                                                                                    : "custom"},
            {"q", spec.fusion.reduction.q},
            {"transform_activation", to_string(spec.fusion.transform_activation)},
            {"use_crf", spec.fusion.use_crf},
            {"crf_constraints", spec.fusion.crf_constraints}}},
          {"augment", spec.augment},
          {"intent_rendering", to_string(spec.rendering)},
          {"separator", spec.separator},
          {"max_len", spec.max_len},
          {"casing", to_string(spec.casing)},
          {"head_dropout", spec.head_dropout}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec spec;
  try {
    const auto& e = j.at("encoder");
    spec.encoder.vocab_size = e.at("vocab_size").get<int>();
    spec.encoder.hidden_size = e.at("hidden_size").get<int>();
    spec.encoder.num_layers = e.at("num_layers").get<int>();
    spec.encoder.num_attention_heads = e.at("num_attention_heads").get<int>();
    spec.encoder.intermediate_size = e.at("intermediate_size").get<int>();
    spec.encoder.max_sequence_length = e.at("max_sequence_length").get<int>();
    spec.encoder.type_vocab_size = e.at("type_vocab_size").get<int>();
    spec.encoder.dropout = e.at("dropout").get<double>();
    spec.encoder.attention_dropout = e.at("attention_dropout").get<double>();
    spec.encoder.layer_norm_eps = e.at("layer_norm_eps").get<double>();
    spec.encoder.initializer_range = e.value("initializer_range", 0.02);
    spec.encoder.pooler = e.at("pooler").get<bool>();
    spec.encoder.pretrained = e.value("pretrained", "");
    const auto& f = j.at("fusion");
    spec.fusion.method = parse_fusion_method(f.at("method").get<std::string>());
    spec.fusion.reduction = parse_reduction(f.at("reduction").get<std::string>(), f.at("q").get<double>());
    spec.fusion.transform_activation = parse_activation(f.at("transform_activation").get<std::string>());
    spec.fusion.use_crf = f.at("use_crf").get<bool>();
    spec.fusion.crf_constraints = f.at("crf_constraints").get<bool>();
    spec.augment = j.at("augment").get<bool>();
    spec.rendering = parse_render_mode(j.at("intent_rendering").get<std::string>());
    spec.separator = j.at("separator").get<std::string>();
    spec.max_len = j.at("max_len").get<int>();
    spec.casing = parse_casing(j.at("casing").get<std::string>());
    spec.head_dropout = j.at("head_dropout").get<double>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt model metadata: ") + e.what());
  }
  return spec;
}

json ExperimentConfig::to_json() const {
  return {{"name", name},
          {"seed", seed},
          {"data", {{"root", data.root.string()}, {"train", data.train}, {"dev", data.dev}, {"test", data.test}}},
          {"model", model_spec_to_json(model)},
          {"train_intent_source", train_intent_source == IntentSource::gold ? "gold" : "predicted"},
          {"training",
           {{"epochs", training.epochs},
            {"learning_rate", training.learning_rate},
            {"warmup_ratio", training.warmup_ratio},
            {"weight_decay", training.weight_decay},
            {"max_grad_norm", training.max_grad_norm},
            {"train_batch_size", training.train_batch_size},
            {"eval_batch_size", training.eval_batch_size}}},
          {"output_dir", output_dir.string()}};
}

}  // namespace intentaug
