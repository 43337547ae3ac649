#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intentaug/tensor.hpp"

namespace intentaug {

// Divisor applied to the summed intent-chunk states: sum is q = 1, mean is
// q = N_chunks, custom uses a fixed q > 0.
struct ReductionSpec {
  enum class Kind { sum, mean, custom };
  Kind kind = Kind::sum;
  double q = 1.0;

  static ReductionSpec sum() { return {Kind::sum, 1.0}; }
  static ReductionSpec mean() { return {Kind::mean, 0.0}; }
  static ReductionSpec custom(double q);

  double divisor(Eigen::Index num_chunks) const {
    switch (kind) {
      case Kind::sum: return 1.0;
      case Kind::mean: return static_cast<double>(num_chunks);
      case Kind::custom: return q;
    }
    return 1.0;
  }
};

ReductionSpec parse_reduction(std::string_view text, double q = 1.0);
std::string to_string(const ReductionSpec& spec);

template <typename Scalar>
struct IntentVector {
  RowVector<Scalar> values;  // [hidden]
  Eigen::Index num_chunks = 0;
};

// Sum of the chunk rows divided by the spec's q.
template <typename Derived>
IntentVector<typename Derived::Scalar> reduce_intent(const Eigen::MatrixBase<Derived>& chunk_states,
                                                     const ReductionSpec& spec) {
  using Scalar = typename Derived::Scalar;
  if (chunk_states.rows() < 1) throw DimensionError("intent chunk is empty (N_chunks = 0): alignment is broken");
  const auto q = static_cast<Scalar>(spec.divisor(chunk_states.rows()));
  return {chunk_states.colwise().sum() / q, chunk_states.rows()};
}

// Row t of the result is tokens[t] ++ intent.
template <typename Derived>
Matrix<typename Derived::Scalar> fuse_concat(const Eigen::MatrixBase<Derived>& tokens,
                                             const IntentVector<typename Derived::Scalar>& intent) {
  using Scalar = typename Derived::Scalar;
  check_dims(tokens.cols() == intent.values.cols(),
             "concat fusion: token width " + std::to_string(tokens.cols()) + " differs from intent width " +
                 std::to_string(intent.values.cols()));
  Matrix<Scalar> out(tokens.rows(), tokens.cols() * 2);
  out.leftCols(tokens.cols()) = tokens;
  out.rightCols(tokens.cols()) = intent.values.replicate(tokens.rows(), 1);
  return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> fuse_add(const Eigen::MatrixBase<Derived>& tokens,
                                          const IntentVector<typename Derived::Scalar>& intent) {
  using Scalar = typename Derived::Scalar;
  check_dims(tokens.cols() == intent.values.cols(),
             "add fusion: token width " + std::to_string(tokens.cols()) + " differs from intent width " +
                 std::to_string(intent.values.cols()));
  Matrix<Scalar> out = tokens;
  out.rowwise() += intent.values;
  return out;
}

enum class Activation { tanh, identity, relu };

Activation parse_activation(std::string_view text);
std::string_view to_string(Activation activation);

// act([token ++ intent] W + b), W is [2*hidden x hidden].
template <typename Scalar>
struct TransformHead {
  Linear<Scalar> dense;
  Activation activation = Activation::tanh;

  TransformHead() = default;
  TransformHead(Eigen::Index hidden, Activation act) : dense(2 * hidden, hidden), activation(act) {}

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    dense.visit(prefix, fn);
  }
};

template <typename Scalar>
Matrix<Scalar> apply_activation(Activation activation, const Matrix<Scalar>& z) {
  switch (activation) {
    case Activation::tanh: return z.array().tanh();
    case Activation::relu: return z.cwiseMax(Scalar(0));
    case Activation::identity: return z;
  }
  return z;
}

// dL/dz given the activation output y and dL/dy.
template <typename Scalar>
Matrix<Scalar> activation_backward(Activation activation, const Matrix<Scalar>& y, const Matrix<Scalar>& dy) {
  switch (activation) {
    case Activation::tanh: return dy.array() * (Scalar(1) - y.array().square());
    case Activation::relu: return dy.array() * (y.array() > Scalar(0)).template cast<Scalar>();
    case Activation::identity: return dy;
  }
  return dy;
}

template <typename Derived>
Matrix<typename Derived::Scalar> fuse_transform(const Eigen::MatrixBase<Derived>& tokens,
                                                const IntentVector<typename Derived::Scalar>& intent,
                                                const TransformHead<typename Derived::Scalar>& head) {
  check_dims(head.dense.in_features() == 2 * tokens.cols() && head.dense.out_features() == tokens.cols(),
             "transform fusion: head is " + std::to_string(head.dense.in_features()) + "x" +
                 std::to_string(head.dense.out_features()) + ", expected " + std::to_string(2 * tokens.cols()) + "x" +
                 std::to_string(tokens.cols()));
  return apply_activation(head.activation, head.dense.forward(fuse_concat(tokens, intent)));
}

// Splits dL/d(fused) of a concat fusion into token and intent gradients.
template <typename Scalar>
std::pair<Matrix<Scalar>, RowVector<Scalar>> fuse_concat_backward(const Matrix<Scalar>& d_fused) {
  const Eigen::Index hidden = d_fused.cols() / 2;
  return {d_fused.leftCols(hidden), d_fused.rightCols(hidden).colwise().sum()};
}

template <typename Scalar>
std::pair<Matrix<Scalar>, RowVector<Scalar>> fuse_add_backward(const Matrix<Scalar>& d_fused) {
  return {d_fused, d_fused.colwise().sum()};
}

// Accumulates head gradients; `fused` is the forward output.
template <typename Scalar>
std::pair<Matrix<Scalar>, RowVector<Scalar>> fuse_transform_backward(TransformHead<Scalar>& head,
                                                                     const Matrix<Scalar>& concat_input,
                                                                     const Matrix<Scalar>& fused,
                                                                     const Matrix<Scalar>& d_fused) {
  Matrix<Scalar> dz = activation_backward(head.activation, fused, d_fused);
  return fuse_concat_backward<Scalar>(head.dense.backward(concat_input, dz));
}

enum class FusionMethod { none, concat, add, transform };

FusionMethod parse_fusion_method(std::string_view text);
std::string_view to_string(FusionMethod method);

struct FusionConfig {
  FusionMethod method = FusionMethod::concat;
  ReductionSpec reduction = ReductionSpec::sum();
  Activation transform_activation = Activation::tanh;
  bool use_crf = false;
  bool crf_constraints = false;  // forbid O->I-x and B-x->I-y transitions

  // Width of the slot head input for a given encoder hidden size.
  Eigen::Index slot_input_width(Eigen::Index hidden) const {
    return method == FusionMethod::concat ? 2 * hidden : hidden;
  }
};

template <typename Scalar>
using SlotHead = Linear<Scalar>;

template <typename Derived>
Matrix<typename Derived::Scalar> slot_logits(const Eigen::MatrixBase<Derived>& fused,
                                             const SlotHead<typename Derived::Scalar>& head) {
  check_dims(fused.cols() == head.in_features(), "slot head expects width " + std::to_string(head.in_features()) +
                                                     ", got " + std::to_string(fused.cols()));
  return head.forward(fused);
}

// Mean cross-entropy over `rows` of `logits` against `gold`, scaled by
// `weight`. Writes dL/dlogits into `d_logits` when given; rows outside
// `rows` are never read.
template <typename Scalar>
Scalar softmax_cross_entropy(const Matrix<Scalar>& logits, std::span<const int> rows, std::span<const int> gold,
                             Scalar weight, Matrix<Scalar>* d_logits) {
  check_dims(rows.size() == gold.size(), "cross-entropy: rows and gold labels differ in length");
  if (d_logits) d_logits->setZero(logits.rows(), logits.cols());
  Scalar loss = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    const auto g = static_cast<Eigen::Index>(gold[i]);
    check_dims(g >= 0 && g < logits.cols(), "cross-entropy: gold label out of range");
    const Scalar lse = log_sum_exp(logits.row(r));
    loss += lse - logits(r, g);
    if (d_logits) {
      d_logits->row(r) = (logits.row(r).array() - lse).exp() * weight;
      (*d_logits)(r, g) -= weight;
    }
  }
  return loss * weight;
}

// Linear-chain CRF over slot labels. transitions(i, j) scores label i
// followed by label j.
template <typename Scalar>
struct CrfLayer {
  Parameter<Scalar> transitions;
  Parameter<Scalar> start;
  Parameter<Scalar> end;
  // Additive constraint masks (0 or -inf); empty when unconstrained.
  Matrix<Scalar> transition_mask;
  RowVector<Scalar> start_mask;

  CrfLayer() = default;
  explicit CrfLayer(Eigen::Index num_labels)
      : transitions(num_labels, num_labels, false), start(1, num_labels, false), end(1, num_labels, false) {}

  Eigen::Index num_labels() const { return transitions.value.rows(); }

  Matrix<Scalar> effective_transitions() const {
    return transition_mask.size() ? Matrix<Scalar>(transitions.value + transition_mask) : transitions.value;
  }
  RowVector<Scalar> effective_start() const {
    return start_mask.size() ? RowVector<Scalar>(start.value.row(0) + start_mask) : RowVector<Scalar>(start.value.row(0));
  }

  // Forbids transitions into I-x from anything but B-x / I-x.
  void constrain_iob(std::span<const std::string> labels) {
    const auto k = static_cast<Eigen::Index>(labels.size());
    check_dims(k == num_labels(), "crf: label list size differs from CRF size");
    const Scalar ninf = -std::numeric_limits<Scalar>::infinity();
    transition_mask = Matrix<Scalar>::Zero(k, k);
    start_mask = RowVector<Scalar>::Zero(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& to = labels[static_cast<std::size_t>(j)];
      if (!to.starts_with("I-")) continue;
      const auto name = std::string_view(to).substr(2);
      start_mask(j) = ninf;
      for (Eigen::Index i = 0; i < k; ++i) {
        const auto& from = labels[static_cast<std::size_t>(i)];
        const bool ok = from.size() > 2 && (from[0] == 'B' || from[0] == 'I') && from[1] == '-' &&
                        std::string_view(from).substr(2) == name;
        if (!ok) transition_mask(i, j) = ninf;
      }
    }
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".transitions", transitions);
    fn(prefix + ".start", start);
    fn(prefix + ".end", end);
  }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> gather_rows(const Matrix<Scalar>& logits, std::span<const int> rows) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(rows.size()), logits.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    check_dims(r >= 0 && r < logits.rows(), "crf: supervised position out of range");
    out.row(static_cast<Eigen::Index>(i)) = logits.row(r);
  }
  return out;
}

}  // namespace detail

// Viterbi path over the supervised rows of `logits`. Ties resolve to the
// lowest label index.
template <typename Scalar>
std::vector<int> crf_decode(const Matrix<Scalar>& logits, const CrfLayer<Scalar>& crf, std::span<const int> rows) {
  if (rows.empty()) throw DimensionError("crf decode: no supervised positions");
  check_dims(logits.cols() == crf.num_labels(), "crf decode: logits width differs from CRF label count");
  const Matrix<Scalar> emissions = detail::gather_rows(logits, rows);
  const Matrix<Scalar> trans = crf.effective_transitions();
  const Eigen::Index len = emissions.rows();
  const Eigen::Index k = emissions.cols();

  RowVector<Scalar> score = crf.effective_start() + emissions.row(0);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> back(len, k);
  for (Eigen::Index t = 1; t < len; ++t) {
    RowVector<Scalar> next(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::Index best = 0;
      Scalar best_score = score(0) + trans(0, j);
      for (Eigen::Index i = 1; i < k; ++i) {
        const Scalar s = score(i) + trans(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      next(j) = best_score + emissions(t, j);
      back(t, j) = static_cast<int>(best);
    }
    score = std::move(next);
  }
  score += crf.end.value.row(0);

  std::vector<int> path(static_cast<std::size_t>(len));
  path.back() = static_cast<int>(argmax(score));
  for (Eigen::Index t = len - 1; t > 0; --t) {
    path[static_cast<std::size_t>(t - 1)] = back(t, path[static_cast<std::size_t>(t)]);
  }
  return path;
}

template <typename Scalar>
Scalar crf_path_score(const Matrix<Scalar>& emissions, std::span<const int> path, const CrfLayer<Scalar>& crf) {
  const Matrix<Scalar> trans = crf.effective_transitions();
  const RowVector<Scalar> start = crf.effective_start();
  Scalar score = start(path[0]) + crf.end.value(0, path.back());
  for (std::size_t t = 0; t < path.size(); ++t) {
    score += emissions(static_cast<Eigen::Index>(t), path[t]);
    if (t) score += trans(path[t - 1], path[t]);
  }
  return score;
}

// -(gold path score - log partition), scaled by `weight`. When `d_logits` is
// given, accumulates CRF parameter gradients and writes dL/dlogits (zero
// outside `rows`).
template <typename Scalar>
Scalar crf_neg_log_likelihood(const Matrix<Scalar>& logits, std::span<const int> gold, CrfLayer<Scalar>& crf,
                              std::span<const int> rows, Scalar weight = Scalar(1),
                              Matrix<Scalar>* d_logits = nullptr) {
  if (rows.empty()) throw DimensionError("crf loss: no supervised positions");
  check_dims(gold.size() == rows.size(), "crf loss: gold tags and supervised positions differ in length");
  check_dims(logits.cols() == crf.num_labels(), "crf loss: logits width differs from CRF label count");
  for (int g : gold) check_dims(g >= 0 && g < crf.num_labels(), "crf loss: gold label out of range");

  const Matrix<Scalar> emissions = detail::gather_rows(logits, rows);
  const Matrix<Scalar> trans = crf.effective_transitions();
  const RowVector<Scalar> start = crf.effective_start();
  const RowVector<Scalar> end = crf.end.value.row(0);
  const Eigen::Index len = emissions.rows();
  const Eigen::Index k = emissions.cols();

  Matrix<Scalar> alpha(len, k);
  alpha.row(0) = start + emissions.row(0);
  for (Eigen::Index t = 1; t < len; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      alpha(t, j) = log_sum_exp((alpha.row(t - 1).transpose() + trans.col(j)).eval()) + emissions(t, j);
    }
  }
  const Scalar log_z = log_sum_exp((alpha.row(len - 1) + end).eval());
  const Scalar loss = log_z - crf_path_score(emissions, gold, crf);

  if (d_logits) {
    Matrix<Scalar> beta(len, k);
    beta.row(len - 1) = end;
    for (Eigen::Index t = len - 1; t > 0; --t) {
      RowVector<Scalar> next = emissions.row(t) + beta.row(t);
      for (Eigen::Index i = 0; i < k; ++i) beta(t - 1, i) = log_sum_exp((trans.row(i) + next).eval());
    }
    Matrix<Scalar> marginals = ((alpha + beta).array() - log_z).exp();
    for (Eigen::Index t = 0; t < len; ++t) marginals(t, gold[static_cast<std::size_t>(t)]) -= Scalar(1);

    d_logits->setZero(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < len; ++t) d_logits->row(rows[static_cast<std::size_t>(t)]) += weight * marginals.row(t);
    crf.start.grad.row(0) += weight * marginals.row(0);
    crf.end.grad.row(0) += weight * marginals.row(len - 1);
    for (Eigen::Index t = 1; t < len; ++t) {
      for (Eigen::Index i = 0; i < k; ++i) {
        if (!std::isfinite(alpha(t - 1, i))) continue;
        for (Eigen::Index j = 0; j < k; ++j) {
          const Scalar pair = std::exp(alpha(t - 1, i) + trans(i, j) + emissions(t, j) + beta(t, j) - log_z);
          crf.transitions.grad(i, j) += weight * pair;
        }
      }
      crf.transitions.grad(gold[static_cast<std::size_t>(t - 1)], gold[static_cast<std::size_t>(t)]) -= weight;
    }
  }
  return loss * weight;
}

}  // namespace intentaug
