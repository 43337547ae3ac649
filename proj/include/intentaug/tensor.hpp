#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "intentaug/error.hpp"

namespace intentaug {

// Rows index sequence positions, columns index features.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

// Trainable tensor with its accumulated gradient.
template <typename Scalar>
struct Parameter {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool decay = true;  // subject to weight decay

  Parameter() = default;
  Parameter(Eigen::Index rows, Eigen::Index cols, bool decay_ = true)
      : value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)), decay(decay_) {}

  void zero_grad() { grad.setZero(); }
  void normal_init(Rng& rng, Scalar stddev) {
    std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<Scalar>(dist(rng));
  }
};

inline void check_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// y = x W + b, with W stored [in x out].
template <typename Scalar>
struct Linear {
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out) : weight(in, out), bias(1, out, false) {}

  Eigen::Index in_features() const { return weight.value.rows(); }
  Eigen::Index out_features() const { return weight.value.cols(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) const {
    check_dims(x.cols() == in_features(), "linear: input width " + std::to_string(x.cols()) +
                                              " does not match weight rows " + std::to_string(in_features()));
    Matrix<Scalar> y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  // Accumulates parameter gradients and returns dL/dx.
  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value.transpose();
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
};

template <typename Scalar>
struct LayerNorm {
  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Scalar eps = Scalar(1e-12);

  struct Cache {
    Matrix<Scalar> normalized;
    Vector<Scalar> inv_std;
  };

  LayerNorm() = default;
  LayerNorm(Eigen::Index width, Scalar eps_) : gamma(1, width, false), beta(1, width, false), eps(eps_) {
    gamma.value.setOnes();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache) const {
    const auto n = static_cast<Scalar>(x.cols());
    Vector<Scalar> mean = x.rowwise().sum() / n;
    Matrix<Scalar> centered = x.colwise() - mean;
    Vector<Scalar> var = centered.array().square().rowwise().sum() / n;
    Vector<Scalar> inv_std = (var.array() + eps).rsqrt();
    Matrix<Scalar> normalized = centered.array().colwise() * inv_std.array();
    Matrix<Scalar> y = normalized.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    if (cache) {
      cache->normalized = std::move(normalized);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    const auto n = static_cast<Scalar>(dy.cols());
    gamma.grad.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
    beta.grad.row(0) += dy.colwise().sum();
    Matrix<Scalar> dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    Vector<Scalar> sum_dxhat = dxhat.rowwise().sum();
    Vector<Scalar> sum_dxhat_xhat = (dxhat.array() * cache.normalized.array()).rowwise().sum();
    Matrix<Scalar> dx = (n * dxhat.array()).colwise() - sum_dxhat.array();
    dx.array() -= cache.normalized.array().colwise() * sum_dxhat_xhat.array();
    dx.array().colwise() *= cache.inv_std.array() / n;
    return dx;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".weight", gamma);
    fn(prefix + ".bias", beta);
  }
};

// Exact (erf) GELU.
template <typename Scalar>
Matrix<Scalar> gelu(const Matrix<Scalar>& x) {
  return x.unaryExpr([](Scalar v) { return Scalar(0.5) * v * (Scalar(1) + std::erf(v / std::sqrt(Scalar(2)))); });
}

template <typename Scalar>
Matrix<Scalar> gelu_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
  const Scalar inv_sqrt2pi = Scalar(1) / std::sqrt(Scalar(2) * Scalar(M_PI));
  Matrix<Scalar> d = x.unaryExpr([inv_sqrt2pi](Scalar v) {
    const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(v / std::sqrt(Scalar(2))));
    return cdf + v * inv_sqrt2pi * std::exp(Scalar(-0.5) * v * v);
  });
  return dy.cwiseProduct(d);
}

// Row-wise softmax; -inf entries get probability zero.
template <typename Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar peak = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - peak).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = values.maxCoeff();
  if (!std::isfinite(peak)) return peak;
  return peak + std::log((values.array() - peak).exp().sum());
}

// Inverted dropout mask: entries are 0 or 1/(1-p).
template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, Scalar p, Rng& rng) {
  Matrix<Scalar> mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  const Scalar scale = Scalar(1) / (Scalar(1) - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : Scalar(0);
  return mask;
}

// Index of the largest entry, lowest index on ties.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return best;
}

}  // namespace intentaug
