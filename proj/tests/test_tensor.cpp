#include <doctest.h>

#include "intentaug/tensor.hpp"
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

// Scalar loss sum(y .* probe) so dL/dy = probe.
double contract(const M& y, const M& probe) { return y.cwiseProduct(probe).sum(); }

}  // namespace

TEST_CASE("linear backward matches finite differences") {
  Rng rng(1);
  Linear<double> lin(4, 3);
  lin.weight.value = random_matrix(4, 3, rng);
  lin.bias.value = random_matrix(1, 3, rng);
  M x = random_matrix(5, 4, rng);
  const M probe = random_matrix(5, 3, rng);

  const M dx = lin.backward(x, probe);
  auto loss = [&] { return contract(lin.forward(x), probe); };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    CHECK(oracle::relative_error(dx.data()[i], oracle::central_difference(loss, x.data()[i], 1e-5)) < 1e-6);
  }
  for (Eigen::Index i = 0; i < lin.weight.value.size(); ++i) {
    CHECK(oracle::relative_error(lin.weight.grad.data()[i],
                                 oracle::central_difference(loss, lin.weight.value.data()[i], 1e-5)) < 1e-6);
  }
  CHECK_THROWS_AS(lin.forward(random_matrix(2, 3, rng)), DimensionError);
}

TEST_CASE("layer norm forward statistics and backward") {
  Rng rng(2);
  LayerNorm<double> ln(6, 1e-12);
  ln.gamma.value = random_matrix(1, 6, rng);
  ln.beta.value = random_matrix(1, 6, rng);
  M x = random_matrix(3, 6, rng) * 4.0;
  const M probe = random_matrix(3, 6, rng);

  LayerNorm<double> plain(6, 1e-12);
  const M y = plain.forward(x, nullptr);
  for (Eigen::Index r = 0; r < 3; ++r) {
    CHECK(y.row(r).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((y.row(r).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-9));
  }

  LayerNorm<double>::Cache cache;
  ln.forward(x, &cache);
  const M dx = ln.backward(cache, probe);
  auto loss = [&] { return contract(ln.forward(x, nullptr), probe); };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    CHECK(oracle::relative_error(dx.data()[i], oracle::central_difference(loss, x.data()[i], 1e-5)) < 1e-5);
  }
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(oracle::relative_error(ln.gamma.grad.data()[i],
                                 oracle::central_difference(loss, ln.gamma.value.data()[i], 1e-5)) < 1e-6);
  }
}

TEST_CASE("gelu values and derivative") {
  M x(1, 3);
  x << -1.0, 0.0, 2.0;
  const M y = gelu(x);
  CHECK(y(0, 0) == doctest::Approx(-0.15865525393145707));
  CHECK(y(0, 1) == 0.0);
  CHECK(y(0, 2) == doctest::Approx(1.9544997361036416));

  Rng rng(3);
  M z = random_matrix(4, 4, rng) * 2.0;
  const M probe = random_matrix(4, 4, rng);
  const M dz = gelu_backward(z, probe);
  auto loss = [&] { return contract(gelu(z), probe); };
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    CHECK(oracle::relative_error(dz.data()[i], oracle::central_difference(loss, z.data()[i], 1e-5)) < 1e-6);
  }
}

TEST_CASE("softmax, log-sum-exp and argmax") {
  M logits(2, 3);
  logits << 1.0, 2.0, 3.0, 1000.0, 1000.0, -INFINITY;
  const M p = softmax_rows(logits);
  CHECK(p.row(0).sum() == doctest::Approx(1.0));
  CHECK(p(0, 2) == doctest::Approx(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  CHECK(p(1, 0) == doctest::Approx(0.5));
  CHECK(p(1, 2) == 0.0);
  CHECK(log_sum_exp(logits.row(1)) == doctest::Approx(1000.0 + std::log(2.0)));

  RowVector<double> v(4);
  v << 1.0, 3.0, 3.0, 2.0;
  CHECK(argmax(v) == 1);
}

TEST_CASE("dropout mask is inverted and seeded") {
  Rng a(9), b(9);
  const M m1 = dropout_mask<double>(50, 50, 0.2, a);
  const M m2 = dropout_mask<double>(50, 50, 0.2, b);
  CHECK(m1 == m2);
  CHECK(m1.mean() == doctest::Approx(1.0).epsilon(0.05));
  for (Eigen::Index i = 0; i < m1.size(); ++i) CHECK((m1.data()[i] == 0.0 || m1.data()[i] == doctest::Approx(1.25)));
}
