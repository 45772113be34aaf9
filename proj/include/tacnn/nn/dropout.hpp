#pragma once

#include <random>
#include <string>
#include <vector>

#include "tacnn/core/tape.hpp"
#include "tacnn/nn/common.hpp"

namespace tacnn {

/// Inverted dropout: in training, zero each element with probability p and
/// scale survivors by 1/(1-p). Identity in eval mode or when p == 0.
template <typename S>
Var<S> dropout(const Var<S>& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: p must lie in [0,1), got " + std::to_string(p));
  if (mode == Mode::eval || p == 0.0) return x;
  auto& tape = *x.tape();
  std::bernoulli_distribution keep(1.0 - p);
  const S scale = S(1.0 / (1.0 - p));
  Tensor<S> mask(x.dims());
  for (auto& m : mask.data()) m = keep(rng) ? scale : S(0);
  Tensor<S> out(x.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * mask[i];
  return tape.record(std::move(out), "dropout", {x},
                     [mask = std::move(mask)](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * mask[i];
                     });
}

}  // namespace tacnn
