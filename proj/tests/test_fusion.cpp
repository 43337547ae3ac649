#include <doctest.h>

#include "intentaug/fusion.hpp"
#include "oracles.hpp"

using namespace intentaug;
using M = Matrix<double>;

namespace {

M random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

}  // namespace

TEST_CASE("sum and mean reductions") {
  M chunk(3, 2);
  chunk << 1, 2, 3, 4, 5, 9;
  const auto s = reduce_intent(chunk, ReductionSpec::sum());
  CHECK(s.values(0) == 9.0);
  CHECK(s.values(1) == 15.0);
  CHECK(s.num_chunks == 3);
  const auto m = reduce_intent(chunk, ReductionSpec::mean());
  CHECK(m.values(0) == doctest::Approx(3.0));
  CHECK(m.values(1) == doctest::Approx(5.0));
  const auto c = reduce_intent(chunk, ReductionSpec::custom(2.0));
  CHECK(c.values(1) == doctest::Approx(7.5));

  // A single-piece chunk makes every reduction the identity.
  const M one = chunk.topRows(1);
  CHECK(reduce_intent(one, ReductionSpec::sum()).values == reduce_intent(one, ReductionSpec::mean()).values);

  CHECK_THROWS_AS(reduce_intent(M(0, 2), ReductionSpec::sum()), DimensionError);
  CHECK_THROWS(ReductionSpec::custom(0.0));
  CHECK_THROWS(ReductionSpec::custom(-1.0));
}

TEST_CASE("reduction parsing") {
  CHECK(parse_reduction("sum").kind == ReductionSpec::Kind::sum);
  CHECK(parse_reduction("mean").kind == ReductionSpec::Kind::mean);
  CHECK(parse_reduction("custom", 4.0).q == 4.0);
  CHECK_THROWS(parse_reduction("max"));
  CHECK(parse_fusion_method("transform") == FusionMethod::transform);
  CHECK_THROWS(parse_fusion_method("gate"));
}

TEST_CASE("fusion output shapes and contents") {
  Rng rng(4);
  const M tokens = random_matrix(5, 3, rng);
  const IntentVector<double> intent{random_matrix(1, 3, rng), 2};

  const M concat = fuse_concat(tokens, intent);
  REQUIRE(concat.rows() == 5);
  REQUIRE(concat.cols() == 6);
  CHECK(concat.leftCols(3) == tokens);
  for (Eigen::Index r = 0; r < 5; ++r) CHECK(concat.row(r).rightCols(3) == intent.values);

  const M add = fuse_add(tokens, intent);
  CHECK(add.cols() == 3);
  CHECK(add.row(2) == tokens.row(2) + intent.values);

  TransformHead<double> head(3, Activation::tanh);
  head.dense.weight.value = random_matrix(6, 3, rng);
  const M transformed = fuse_transform(tokens, intent, head);
  CHECK(transformed.rows() == 5);
  CHECK(transformed.cols() == 3);
  CHECK((transformed - M((concat * head.dense.weight.value).array().tanh())).norm() < 1e-12);

  CHECK_THROWS_AS(fuse_concat(tokens, IntentVector<double>{random_matrix(1, 4, rng), 1}), DimensionError);
  CHECK_THROWS_AS(fuse_add(tokens, IntentVector<double>{random_matrix(1, 2, rng), 1}), DimensionError);
  TransformHead<double> wrong(4, Activation::tanh);
  CHECK_THROWS_AS(fuse_transform(tokens, intent, wrong), DimensionError);

  FusionConfig cfg;
  CHECK(cfg.slot_input_width(8) == 16);
  cfg.method = FusionMethod::add;
  CHECK(cfg.slot_input_width(8) == 8);
}

TEST_CASE("transform fusion backward matches finite differences") {
  for (auto act : {Activation::tanh, Activation::identity, Activation::relu}) {
    Rng rng(5);
    M tokens = random_matrix(4, 3, rng);
    IntentVector<double> intent{random_matrix(1, 3, rng), 1};
    TransformHead<double> head(3, act);
    head.dense.weight.value = random_matrix(6, 3, rng);
    head.dense.bias.value = random_matrix(1, 3, rng);
    const M probe = random_matrix(4, 3, rng);

    const M fused = fuse_transform(tokens, intent, head);
    const auto [d_tokens, d_intent] = fuse_transform_backward(head, fuse_concat(tokens, intent), fused, probe);
    auto loss = [&] { return fuse_transform(tokens, intent, head).cwiseProduct(probe).sum(); };
    for (Eigen::Index i = 0; i < tokens.size(); ++i) {
      CHECK(oracle::relative_error(d_tokens.data()[i], oracle::central_difference(loss, tokens.data()[i], 1e-6)) <
            1e-5);
    }
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(oracle::relative_error(d_intent(i), oracle::central_difference(loss, intent.values(i), 1e-6)) < 1e-5);
    }
    for (Eigen::Index i = 0; i < head.dense.weight.value.size(); ++i) {
      CHECK(oracle::relative_error(head.dense.weight.grad.data()[i],
                                   oracle::central_difference(loss, head.dense.weight.value.data()[i], 1e-6)) < 1e-5);
    }
  }
}

TEST_CASE("slot head cross-entropy gradient") {
  Rng rng(6);
  SlotHead<double> head(6, 4);
  head.weight.value = random_matrix(6, 4, rng);
  M fused = random_matrix(5, 6, rng);
  const std::vector<int> rows{1, 2, 4};
  const std::vector<int> gold{0, 3, 2};
  const double weight = 1.0 / 3.0;

  const M logits = slot_logits(fused, head);
  M d_logits;
  const double loss = softmax_cross_entropy<double>(logits, rows, gold, weight, &d_logits);
  CHECK(d_logits.row(0).norm() == 0.0);
  CHECK(d_logits.row(3).norm() == 0.0);

  double expected = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = logits.row(rows[i]);
    expected += -std::log(std::exp(r(gold[i])) / r.array().exp().sum());
  }
  CHECK(loss == doctest::Approx(expected / 3.0).epsilon(1e-12));

  const M d_fused = head.backward(fused, d_logits);
  auto f = [&] { return softmax_cross_entropy<double>(slot_logits(fused, head), rows, gold, weight, nullptr); };
  for (Eigen::Index i = 0; i < fused.size(); ++i) {
    CHECK(oracle::relative_error(d_fused.data()[i], oracle::central_difference(f, fused.data()[i], 1e-6)) < 1e-5);
  }
  CHECK_THROWS_AS(slot_logits(random_matrix(2, 5, rng), head), DimensionError);
}
