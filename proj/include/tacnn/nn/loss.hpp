#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tacnn/core/tape.hpp"

namespace tacnn {

/// Numerically stable softmax of one logit row.
template <typename S>
std::vector<S> softmax(std::span<const S> logits) {
  std::vector<S> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const S mx = *std::max_element(p.begin(), p.end());
  S z = 0;
  for (auto& v : p) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

/// Throws InputError unless target is nonnegative and sums to 1 within 1e-6.
template <typename S>
void validate_distribution(std::span<const S> target) {
  double total = 0;
  for (S v : target) {
    if (!(v >= S(0))) throw InputError("target contains a negative or non-finite entry");
    total += double(v);
  }
  if (std::abs(total - 1.0) > 1e-6) throw InputError("target sums to " + std::to_string(total) + ", not 1");
}

/// Mean over the batch of -sum_k target_k * log softmax(logits)_k.
/// logits and targets are (N, K, 1, 1); targets may be soft.
template <typename S>
Var<S> softmax_cross_entropy(const Var<S>& logits, const Tensor<S>& targets) {
  const auto& d = logits.dims();
  if (d[2] != 1 || d[3] != 1 || targets.dims() != d) {
    throw ShapeError("softmax_cross_entropy: logits " + to_string(d) + ", targets " + to_string(targets.dims()));
  }
  const std::size_t N = d[0], K = d[1];
  auto& tape = *logits.tape();
  Tensor<S> probs(d);
  S loss = 0;
  for (std::size_t n = 0; n < N; ++n) {
    std::span<const S> row(logits.value().data().data() + n * K, K);
    std::span<const S> tgt(targets.data().data() + n * K, K);
    validate_distribution(tgt);
    const S mx = *std::max_element(row.begin(), row.end());
    S z = 0;
    for (S v : row) z += std::exp(v - mx);
    const S log_z = mx + std::log(z);
    for (std::size_t k = 0; k < K; ++k) {
      probs[n * K + k] = std::exp(row[k] - log_z);
      if (tgt[k] > S(0)) loss -= tgt[k] * (row[k] - log_z);
    }
  }
  loss /= S(N);
  return tape.record(Tensor<S>::scalar(loss), "softmax_xent", {logits},
                     [probs = std::move(probs), targets, N](const Tensor<S>& g, const Tensor<S>&,
                                                            std::span<Tensor<S>* const> gi) {
                       const S scale = g[0] / S(N);
                       for (std::size_t i = 0; i < probs.size(); ++i) (*gi[0])[i] += scale * (probs[i] - targets[i]);
                     });
}

}  // namespace tacnn
