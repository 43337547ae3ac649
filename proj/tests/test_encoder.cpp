#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "intentaug/encoder.hpp"
#include "oracles.hpp"

using namespace intentaug;
using M = Matrix<double>;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.vocab_size = 12;
  c.hidden_size = 8;
  c.num_layers = 2;
  c.num_attention_heads = 2;
  c.intermediate_size = 12;
  c.max_sequence_length = 10;
  c.initializer_range = 0.5;
  return c;
}

TransformerEncoder<double> make_encoder(EncoderConfig c, std::uint64_t seed) {
  TransformerEncoder<double> enc(std::move(c));
  Rng rng(seed);
  enc.init(rng);
  // Perturb LayerNorm parameters away from (1, 0).
  std::normal_distribution<double> d(0.0, 0.1);
  enc.visit([&](const std::string& name, Parameter<double>& p) {
    if (name.find("LayerNorm") != std::string::npos) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += d(rng);
    }
  });
  return enc;
}

AlignedEncoding encoding(std::vector<int> ids) {
  AlignedEncoding e;
  e.ids = std::move(ids);
  return e;
}

}  // namespace

TEST_CASE("output shapes") {
  const auto enc = make_encoder(small_config(), 1);
  const std::vector<int> ids{2, 5, 6, 7, 3};
  const auto out = enc.forward(ids, {}, Mode::eval, nullptr, nullptr);
  CHECK(out.hidden_states.rows() == 5);
  CHECK(out.hidden_states.cols() == 8);
  CHECK(out.pooled.cols() == 8);
  CHECK((out.pooled.array().abs() <= 1.0).all());
}

TEST_CASE("config validation") {
  auto c = small_config();
  c.num_attention_heads = 3;
  CHECK_THROWS_AS(TransformerEncoder<double>{c}, ConfigError);
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.initializer_range = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward rejects bad input") {
  const auto enc = make_encoder(small_config(), 1);
  CHECK_THROWS_AS(enc.forward(std::vector<int>{}, {}, Mode::eval, nullptr, nullptr), DimensionError);
  CHECK_THROWS_AS(enc.forward(std::vector<int>{2, 99}, {}, Mode::eval, nullptr, nullptr), DimensionError);
  CHECK_THROWS_AS(enc.forward(std::vector<int>(11, 4), {}, Mode::eval, nullptr, nullptr), OverflowError);
  CHECK_THROWS(enc.forward(std::vector<int>{2, 3}, {}, Mode::train, nullptr, nullptr));
}

TEST_CASE("eval mode is deterministic; train mode follows the seed") {
  const auto enc = make_encoder(small_config(), 2);
  const std::vector<int> ids{2, 4, 9, 3};
  const auto a = enc.forward(ids, {}, Mode::eval, nullptr, nullptr);
  const auto b = enc.forward(ids, {}, Mode::eval, nullptr, nullptr);
  CHECK(a.hidden_states == b.hidden_states);

  Rng r1(5), r2(5), r3(6);
  const auto t1 = enc.forward(ids, {}, Mode::train, &r1, nullptr);
  const auto t2 = enc.forward(ids, {}, Mode::train, &r2, nullptr);
  const auto t3 = enc.forward(ids, {}, Mode::train, &r3, nullptr);
  CHECK(t1.hidden_states == t2.hidden_states);
  CHECK(t1.hidden_states != t3.hidden_states);
  CHECK(t1.hidden_states != a.hidden_states);
}

TEST_CASE("batch padding does not change valid positions") {
  const auto enc = make_encoder(small_config(), 3);
  const std::vector<AlignedEncoding> batch{encoding({2, 5, 3}), encoding({2, 6, 7, 8, 9, 3}), encoding({2, 3})};
  const auto out = enc.encode(batch);
  REQUIRE(out.batch_size() == 3);
  CHECK(out.sequence_length() == 6);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto single = enc.forward(batch[b].ids, {}, Mode::eval, nullptr, nullptr);
    const auto n = static_cast<Eigen::Index>(batch[b].ids.size());
    CHECK((out.hidden_states[b].topRows(n) - single.hidden_states).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.pooled.row(static_cast<Eigen::Index>(b)) - single.pooled).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index i = 0; i < 6; ++i) CHECK(out.valid[b][static_cast<std::size_t>(i)] == (i < n));
  }
}

TEST_CASE("backward matches finite differences on every parameter") {
  auto c = small_config();
  c.dropout = 0.0;
  c.attention_dropout = 0.0;
  auto enc = make_encoder(c, 4);
  const std::vector<int> ids{2, 5, 5, 7, 3};
  const bool mask[] = {true, true, true, true, false};

  Rng rng(9);
  std::normal_distribution<double> d(0.0, 1.0);
  M probe_h(5, 8);
  for (Eigen::Index i = 0; i < probe_h.size(); ++i) probe_h.data()[i] = d(rng);
  RowVector<double> probe_p(8);
  for (Eigen::Index i = 0; i < 8; ++i) probe_p(i) = d(rng);

  auto loss = [&] {
    const auto out = enc.forward(ids, mask, Mode::eval, nullptr, nullptr);
    return out.hidden_states.cwiseProduct(probe_h).sum() + out.pooled.dot(probe_p);
  };

  TransformerEncoder<double>::Cache cache;
  Rng unused(0);
  enc.visit([](const std::string&, Parameter<double>& p) { p.zero_grad(); });
  enc.forward(ids, mask, Mode::train, &unused, &cache);
  enc.backward(cache, probe_h, probe_p);

  double worst = 0;
  std::string worst_name;
  std::size_t checked = 0;
  enc.visit([&](const std::string& name, Parameter<double>& p) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double numeric = oracle::central_difference(loss, p.value.data()[i], 1e-6);
      const double err = oracle::relative_error(p.grad.data()[i], numeric, 1e-8);
      if (err > worst) {
        worst = err;
        worst_name = name;
      }
      ++checked;
    }
  });
  INFO("worst parameter: " << worst_name);
  CHECK(checked > 1000);
  CHECK(worst < 1e-4);
}

TEST_CASE("converted checkpoint reproduces the reference implementation") {
  const std::filesystem::path dir = std::filesystem::path(TEST_DATA_DIR) / "tiny_bert";
  const auto enc = load_pretrained_encoder<double>(dir);
  CHECK(enc.config().hidden_size == 8);

  std::ifstream in(dir / "expected.json");
  REQUIRE(in);
  nlohmann::json expected;
  in >> expected;
  REQUIRE(expected.size() == 3);
  std::vector<AlignedEncoding> batch;
  for (const auto& item : expected) {
    const auto ids = item.at("ids").get<std::vector<int>>();
    batch.push_back(encoding(ids));
    const auto out = enc.forward(ids, {}, Mode::eval, nullptr, nullptr);
    const auto rows = item.at("hidden_states");
    double worst = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t col = 0; col < 8; ++col) {
        worst = std::max(worst, std::abs(out.hidden_states(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) -
                                         rows[r][col].get<double>()));
      }
    }
    for (std::size_t col = 0; col < 8; ++col) {
      worst = std::max(worst, std::abs(out.pooled(static_cast<Eigen::Index>(col)) - item["pooled"][col].get<double>()));
    }
    CHECK(worst < 1e-9);
  }

  const auto batched = enc.encode(batch);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto single = enc.forward(batch[b].ids, {}, Mode::eval, nullptr, nullptr);
    CHECK((batched.hidden_states[b].topRows(single.hidden_states.rows()) - single.hidden_states).cwiseAbs().maxCoeff() <
          1e-12);
  }

  CHECK_THROWS_AS(load_pretrained_encoder<double>(dir / "missing"), CheckpointError);
}
