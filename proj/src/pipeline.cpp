#include "intentaug/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "intentaug/optim.hpp"
#include "intentaug/weights.hpp"

namespace intentaug {

namespace fs = std::filesystem;
using json = nlohmann::json;

json EpochLog::to_json() const {
  return {{"epoch", epoch},
          {"train_loss", train_loss},
          {"dev",
           {{"precision", dev.slot_precision},
            {"recall", dev.slot_recall},
            {"f1", dev.slot_f1},
            {"intent_accuracy", dev.intent_accuracy},
            {"semantic_frame_accuracy", dev.semantic_frame_accuracy}}},
          {"best", best}};
}

std::unique_ptr<Model> build_model(const ExperimentConfig& config, const Corpus& train) {
  config.validate();
  auto labels = build_vocabularies(train);
  Rng rng(config.seed);
  const bool lowercase = config.model.casing == Casing::uncased;

  if (!config.model.encoder.pretrained.empty()) {
    const fs::path dir = config.model.encoder.pretrained;
    auto tokenizer = WordPieceTokenizer::from_file(dir / "vocab.txt", lowercase);
    auto encoder = load_pretrained_encoder<double>(dir);
    EncoderConfig tuned = encoder.config();
    tuned.dropout = config.model.encoder.dropout;
    tuned.attention_dropout = config.model.encoder.attention_dropout;
    // Rebuild with the experiment's dropout rates, then reload the weights.
    TransformerEncoder<double> adjusted(tuned);
    load_weights<double>(adjusted, dir / "weights.bin");
    auto model = std::make_unique<Model>(config.model, std::move(labels), std::move(tokenizer), std::move(adjusted));
    model->init(rng, /*keep_encoder=*/true);
    return model;
  }

  // Vocabulary covers the training words plus everything the augmented
  // input can contain.
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(train.size() + 1);
  for (const auto& u : train.utterances) sentences.push_back(u.tokens);
  std::vector<std::string> extra{config.model.separator};
  for (const auto& intent : labels.intents()) {
    for (auto mode : {RenderMode::raw, RenderMode::camel_split}) {
      for (auto& w : render_intent(intent, mode, config.model.casing).words) extra.push_back(std::move(w));
    }
  }
  sentences.push_back(std::move(extra));
  WordPieceTokenizer tokenizer(build_wordpiece_vocab(sentences, lowercase), lowercase);
  auto model = std::make_unique<Model>(config.model, std::move(labels), std::move(tokenizer));
  model->init(rng);
  return model;
}

std::vector<PredictionRecord> infer(const Model& model, std::span<const std::vector<std::string>> utterances) {
  std::vector<PredictionRecord> out;
  out.reserve(utterances.size());
  for (const auto& tokens : utterances) out.push_back(model.predict(tokens));
  return out;
}

EvalReport evaluate_model(const Model& model, const Corpus& corpus) {
  std::vector<Frame> gold, pred;
  gold.reserve(corpus.size());
  pred.reserve(corpus.size());
  for (const auto& u : corpus.utterances) {
    gold.push_back({u.intent, u.slot_tags});
    auto record = model.predict(u.tokens);
    pred.push_back({std::move(record.intent), std::move(record.tags)});
  }
  auto report = evaluate(gold, pred);
  report.split = corpus.split;
  return report;
}

TrainingResult train(const ExperimentConfig& config, const Corpus& train_split, const Corpus& dev_split,
                     std::ostream* log) {
  config.validate();
  if (train_split.empty()) throw DataError("training split is empty");
  if (dev_split.empty()) throw DataError("dev split is empty");

  auto model = build_model(config, train_split);
  const auto& labels = model->labels();

  std::vector<TrainItem> items;
  items.reserve(train_split.size());
  for (const auto& u : train_split.utterances) {
    TrainItem item;
    item.tokens = u.tokens;
    item.plain = model->encode_plain(u.tokens);
    item.intent = labels.intent_index(u.intent);
    if (config.model.augment) item.gold_augmented = model->encode_augmented(u.tokens, u.intent);
    for (const auto& tag : u.slot_tags) item.slots.push_back(labels.slot_index(tag));
    items.push_back(std::move(item));
  }

  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto batch = static_cast<std::size_t>(config.training.train_batch_size);
  const long steps_per_epoch = static_cast<long>((items.size() + batch - 1) / batch);
  LinearSchedule schedule;
  schedule.base_rate = config.training.learning_rate;
  schedule.total_steps = steps_per_epoch * config.training.epochs;
  schedule.warmup_steps = static_cast<long>(std::ceil(config.training.warmup_ratio * static_cast<double>(schedule.total_steps)));
  AdamW<double> optimizer(config.training.weight_decay);

  TrainingResult result;
  auto record = [&](EpochLog entry) {
    entry.dev.name = config.name;
    const bool better = result.log.empty() || entry.dev.slot_f1 > result.log[static_cast<std::size_t>(result.best_epoch)].dev.slot_f1;
    if (better) {
      result.best_epoch = entry.epoch;
      result.model = std::make_unique<Model>(*model);
    }
    entry.best = better;
    if (log) *log << entry.to_json().dump() << '\n' << std::flush;
    result.log.push_back(std::move(entry));
  };

  record({0, 0.0, evaluate_model(*model, dev_split), false});

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= config.training.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::size_t positions = 0;
      for (std::size_t i = start; i < stop; ++i) positions += items[order[i]].slots.size();
      const double count = static_cast<double>(stop - start);
      const double intent_weight = 1.0 / count;
      const double slot_weight = config.model.fusion.use_crf ? 1.0 / count : 1.0 / static_cast<double>(positions);

      model->zero_grad();
      double batch_loss = 0;
      for (std::size_t i = start; i < stop; ++i) {
        batch_loss += model->accumulate(items[order[i]], config.train_intent_source, intent_weight, slot_weight, rng);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                            " (learning rate " + std::to_string(schedule.rate(step)) + ")");
      }
      AdamW<double>::clip_grad_norm(*model, config.training.max_grad_norm);
      optimizer.step(*model, schedule.rate(step));
      ++step;
      epoch_loss += batch_loss * count;
    }
    record({epoch, epoch_loss / static_cast<double>(items.size()), evaluate_model(*model, dev_split), false});
  }
  return result;
}

void save_checkpoint(Model& model, const fs::path& dir, const json& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create " + dir.string() + ": " + ec.message());
  json meta = {{"format_version", kCheckpointVersion},
               {"scalar", "float64"},
               {"model", model_spec_to_json(model.spec())},
               {"labels", {{"intents", model.labels().intents()}, {"slots", model.labels().slots()}}},
               {"tokenizer", {{"lowercase", model.tokenizer().lowercase()}}}};
  if (!extra.is_null()) meta["extra"] = extra;
  std::ofstream out(dir / "metadata.json");
  if (!out) throw CheckpointError("cannot write " + (dir / "metadata.json").string());
  out << meta.dump(2) << '\n';
  model.tokenizer().save(dir / "vocab.txt");
  save_weights<double>(model, dir / "weights.bin");
}

json load_checkpoint_metadata(const fs::path& dir) {
  std::ifstream in(dir / "metadata.json");
  if (!in) throw CheckpointError("missing checkpoint metadata: " + (dir / "metadata.json").string());
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint metadata: " + std::string(e.what()));
  }
  const int version = meta.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  return meta;
}

std::unique_ptr<Model> load_checkpoint(const fs::path& dir, const CheckpointExpectations& expect) {
  const json meta = load_checkpoint_metadata(dir);
  ModelSpec spec = model_spec_from_json(meta.at("model"));
  std::vector<std::string> intents, slots;
  bool lowercase = true;
  try {
    intents = meta.at("labels").at("intents").get<std::vector<std::string>>();
    slots = meta.at("labels").at("slots").get<std::vector<std::string>>();
    lowercase = meta.at("tokenizer").at("lowercase").get<bool>();
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint metadata: " + std::string(e.what()));
  }
  LabelVocabulary labels(std::move(intents), std::move(slots));
  if (expect.num_intents && *expect.num_intents != labels.num_intents()) {
    throw CheckpointError("intent vocabulary size mismatch: checkpoint has " + std::to_string(labels.num_intents()) +
                          ", expected " + std::to_string(*expect.num_intents));
  }
  if (expect.num_slots && *expect.num_slots != labels.num_slots()) {
    throw CheckpointError("slot vocabulary size mismatch: checkpoint has " + std::to_string(labels.num_slots()) +
                          ", expected " + std::to_string(*expect.num_slots));
  }
  if (expect.fusion) spec.fusion = *expect.fusion;

  auto tokenizer = WordPieceTokenizer::from_file(dir / "vocab.txt", lowercase);
  if (tokenizer.vocab_size() != spec.encoder.vocab_size) {
    throw CheckpointError("vocab.txt has " + std::to_string(tokenizer.vocab_size()) + " entries, metadata expects " +
                          std::to_string(spec.encoder.vocab_size));
  }
  auto model = std::make_unique<Model>(spec, std::move(labels), std::move(tokenizer));
  try {
    load_weights<double>(*model, dir / "weights.bin");
  } catch (const CheckpointError& e) {
    if (expect.fusion) {
      throw CheckpointError("checkpoint does not fit fusion method '" + std::string(to_string(expect.fusion->method)) +
                            "' (width mismatch): " + e.what());
    }
    throw;
  }
  return model;
}

}  // namespace intentaug
