#pragma once

#include <string>
#include <vector>

#include "tacnn/core/tape.hpp"

namespace tacnn {

/// 2x2 max pooling with stride 2 and no padding. Extents must be even.
/// Gradient goes to the first maximum in row-major scan order of the window.
template <typename S>
Var<S> max_pool2x2(const Var<S>& x) {
  const auto& d = x.dims();
  if (d[2] % 2 != 0 || d[3] % 2 != 0) throw ShapeError("max_pool2x2: odd spatial extents " + to_string(d));
  auto& tape = *x.tape();
  const auto& xv = x.value();
  const std::size_t ho = d[2] / 2, wo = d[3] / 2;
  Tensor<S> out(Shape{d[0], d[1], ho, wo});
  std::vector<std::size_t> argmax(out.size());
  std::size_t k = 0;
  for (std::size_t nc = 0; nc < d[0] * d[1]; ++nc)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j, ++k) {
        const std::size_t base = (nc * d[2] + 2 * i) * d[3] + 2 * j;
        std::size_t best = base;
        for (std::size_t cand : {base + 1, base + d[3], base + d[3] + 1})
          if (xv[cand] > xv[best]) best = cand;
        out[k] = xv[best];
        argmax[k] = best;
      }
  return tape.record(std::move(out), "max_pool2x2", {x},
                     [argmax = std::move(argmax)](const Tensor<S>& g, const Tensor<S>&,
                                                  std::span<Tensor<S>* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[argmax[i]] += g[i];
                     });
}

}  // namespace tacnn
