#include <doctest.h>

#include <cstdlib>

#include "intentaug/config.hpp"
#include "intentaug/error.hpp"

using namespace intentaug;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
name: t
data:
  root: data/x
)";

ExperimentConfig parse(const std::string& extra) { return parse_config(std::string(kMinimal) + extra, "/base"); }

}  // namespace

TEST_CASE("defaults and relative path resolution") {
  const auto c = parse("");
  CHECK(c.name == "t");
  CHECK(c.data.root == fs::path("/base/data/x"));
  CHECK(c.output_dir == fs::path("/base/runs/t"));
  CHECK(c.model.fusion.method == FusionMethod::concat);
  CHECK(c.model.fusion.reduction.kind == ReductionSpec::Kind::sum);
  CHECK(c.model.augment);
  CHECK(c.model.separator == "#");
  CHECK(c.model.casing == Casing::uncased);
  CHECK(c.train_intent_source == IntentSource::gold);
}

TEST_CASE("fields are read") {
  const auto c = parse(R"(
seed: 7
encoder:
  hidden_size: 16
  num_attention_heads: 4
  initializer_range: 0.1
fusion:
  method: transform
  reduction: custom
  q: 2.5
  transform_activation: relu
  use_crf: true
augment:
  intent_rendering: camel_split
  separator: "::"
training:
  epochs: 3
  learning_rate: 1.0e-4
  max_len: 20
)");
  CHECK(c.seed == 7);
  CHECK(c.model.encoder.hidden_size == 16);
  CHECK(c.model.encoder.initializer_range == 0.1);
  CHECK(c.model.fusion.method == FusionMethod::transform);
  CHECK(c.model.fusion.reduction.q == 2.5);
  CHECK(c.model.fusion.transform_activation == Activation::relu);
  CHECK(c.model.fusion.use_crf);
  CHECK(c.model.rendering == RenderMode::camel_split);
  CHECK(c.model.separator == "::");
  CHECK(c.training.epochs == 3);
  CHECK(c.model.max_len == 20);
}

TEST_CASE("invalid values name the field") {
  CHECK_THROWS_WITH_AS(parse("training:\n  epochs: -1\n"),
                       "config field 'training.epochs' must be positive (got -1)", ConfigError);
  CHECK_THROWS_WITH_AS(parse("training:\n  learning_rate: 0\n"), doctest::Contains("training.learning_rate"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse("fusion:\n  reductoin: sum\n"), doctest::Contains("fusion.reductoin"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("extra: 1\n"), doctest::Contains("'extra'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("training:\n  epochs: many\n"), doctest::Contains("wrong type"), ConfigError);
  CHECK_THROWS_AS(parse("fusion:\n  method: gate\n"), ConfigError);
  CHECK_THROWS_AS(parse("fusion:\n  reduction: custom\n  q: 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("augment:\n  enabled: false\n"), ConfigError);
  CHECK_THROWS_AS(parse("encoder:\n  hidden_size: 30\n  num_attention_heads: 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("", "."), ConfigError);
  CHECK_THROWS_AS(parse_config("a: [", "."), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST_CASE("single-pass baseline is allowed without augmentation") {
  const auto c = parse("augment:\n  enabled: false\nfusion:\n  method: none\n");
  CHECK_FALSE(c.model.augment);
}

TEST_CASE("data root falls back to the environment") {
  const std::string yaml = "name: t\n";
  ::unsetenv(kDataRootEnv);
  CHECK_THROWS_WITH_AS(parse_config(yaml, "/base"), doctest::Contains("data.root"), ConfigError);
  ::setenv(kDataRootEnv, "/data/snips", 1);
  CHECK(parse_config(yaml, "/base").data.root == fs::path("/data/snips"));
  ::unsetenv(kDataRootEnv);
}

TEST_CASE("model spec JSON round trip") {
  const auto c = parse("fusion:\n  method: add\n  reduction: mean\n  use_crf: true\n");
  auto spec = c.model;
  spec.encoder.vocab_size = 50;
  const auto back = model_spec_from_json(model_spec_to_json(spec));
  CHECK(model_spec_to_json(back) == model_spec_to_json(spec));
  CHECK(back.fusion.method == FusionMethod::add);
  CHECK(back.fusion.reduction.kind == ReductionSpec::Kind::mean);
}

TEST_CASE("every shipped config parses") {
  std::size_t count = 0;
  for (const auto& entry : fs::recursive_directory_iterator(fs::path(REPO_DIR) / "configs")) {
    if (entry.path().extension() != ".yaml") continue;
    INFO(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++count;
  }
  CHECK(count >= 18);
}
