#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tacnn/core/tape.hpp"
#include "tacnn/core/tensor.hpp"

namespace tacnn {

using AxisOrder = std::array<std::size_t, 4>;

inline void validate_permutation(const AxisOrder& order) {
  std::array<bool, 4> seen{};
  for (auto a : order) {
    if (a > 3 || seen[a]) {
      throw ConfigError("invalid axis permutation (" + std::to_string(order[0]) + "," +
                        std::to_string(order[1]) + "," + std::to_string(order[2]) + "," +
                        std::to_string(order[3]) + ")");
    }
    seen[a] = true;
  }
}

inline AxisOrder inverse_permutation(const AxisOrder& order) {
  validate_permutation(order);
  AxisOrder inv{};
  for (std::size_t i = 0; i < 4; ++i) inv[order[i]] = i;
  return inv;
}

/// Output axis i is input axis order[i].
template <typename S>
Tensor<S> permute_tensor(const Tensor<S>& x, const AxisOrder& order) {
  validate_permutation(order);
  const auto& d = x.dims();
  const std::array<std::size_t, 4> stride{d[1] * d[2] * d[3], d[2] * d[3], d[3], 1};
  Shape od{d[order[0]], d[order[1]], d[order[2]], d[order[3]]};
  const std::array<std::size_t, 4> os{stride[order[0]], stride[order[1]], stride[order[2]], stride[order[3]]};
  Tensor<S> out(od);
  auto dst = out.data();
  auto src = x.data();
  std::size_t k = 0;
  for (std::size_t a = 0; a < od[0]; ++a)
    for (std::size_t b = 0; b < od[1]; ++b)
      for (std::size_t c = 0; c < od[2]; ++c) {
        const std::size_t base = a * os[0] + b * os[1] + c * os[2];
        for (std::size_t e = 0; e < od[3]; ++e) dst[k++] = src[base + e * os[3]];
      }
  return out;
}

inline void require_same_dims(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw ShapeError(std::string(op) + ": " + to_string(a) + " vs " + to_string(b));
}

namespace detail {

template <typename S>
void accumulate(Tensor<S>& into, const Tensor<S>& g) {
  auto dst = into.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

template <typename S>
Var<S> permute(const Var<S>& x, const AxisOrder& order) {
  auto& tape = *x.tape();
  const AxisOrder inv = inverse_permutation(order);
  return tape.record(permute_tensor(x.value(), order), "permute", {x},
                     [inv](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       detail::accumulate(*gi[0], permute_tensor(g, inv));
                     });
}

enum class Elementwise { add, mul, max };

/// Pointwise binary op on equal shapes. The max gradient goes to the larger
/// operand; ties go to the first.
template <typename S>
Var<S> elementwise(const Var<S>& a, const Var<S>& b, Elementwise kind) {
  require_same_dims(a.dims(), b.dims(), "elementwise");
  auto& tape = *a.tape();
  const Tensor<S>* av = &a.value();
  const Tensor<S>* bv = &b.value();
  Tensor<S> out(av->dims());
  auto o = out.data();
  auto x = av->data();
  auto y = bv->data();
  switch (kind) {
    case Elementwise::add:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
      return tape.record(std::move(out), "add", {a, b},
                         [](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                           if (gi[0]) detail::accumulate(*gi[0], g);
                           if (gi[1]) detail::accumulate(*gi[1], g);
                         });
    case Elementwise::mul:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
      return tape.record(std::move(out), "mul", {a, b},
                         [av, bv](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (gi[0]) (*gi[0])[i] += g[i] * (*bv)[i];
                             if (gi[1]) (*gi[1])[i] += g[i] * (*av)[i];
                           }
                         });
    case Elementwise::max:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] >= y[i] ? x[i] : y[i];
      return tape.record(std::move(out), "max", {a, b},
                         [av, bv](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const bool first = (*av)[i] >= (*bv)[i];
                             Tensor<S>* dst = first ? gi[0] : gi[1];
                             if (dst) (*dst)[i] += g[i];
                           }
                         });
  }
  throw ConfigError("unknown elementwise kind");
}

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  return elementwise(a, b, Elementwise::add);
}
template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  return elementwise(a, b, Elementwise::mul);
}
template <typename S>
Var<S> maximum(const Var<S>& a, const Var<S>& b) {
  return elementwise(a, b, Elementwise::max);
}

template <typename S>
Tensor<S> reduce_mean_tensor(const Tensor<S>& x, std::size_t axis) {
  if (axis > 3) throw ConfigError("reduce_mean: axis " + std::to_string(axis) + " out of range");
  const auto& d = x.dims();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= d[i];
  for (std::size_t i = axis + 1; i < 4; ++i) inner *= d[i];
  const std::size_t extent = d[axis];
  Shape od = d;
  od[axis] = 1;
  Tensor<S> out(od);
  const S scale = S(1) / static_cast<S>(extent);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      S acc = 0;
      for (std::size_t e = 0; e < extent; ++e) acc += x[(o * extent + e) * inner + i];
      out[o * inner + i] = acc * scale;
    }
  return out;
}

template <typename S>
Var<S> reduce_mean(const Var<S>& x, std::size_t axis) {
  auto& tape = *x.tape();
  Tensor<S> out = reduce_mean_tensor(x.value(), axis);
  const Shape d = x.dims();
  return tape.record(std::move(out), "reduce_mean", {x},
                     [d, axis](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       std::size_t outer = 1, inner = 1;
                       for (std::size_t i = 0; i < axis; ++i) outer *= d[i];
                       for (std::size_t i = axis + 1; i < 4; ++i) inner *= d[i];
                       const std::size_t extent = d[axis];
                       const S scale = S(1) / static_cast<S>(extent);
                       auto& gx = *gi[0];
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t e = 0; e < extent; ++e)
                           for (std::size_t i = 0; i < inner; ++i)
                             gx[(o * extent + e) * inner + i] += g[o * inner + i] * scale;
                     });
}

/// Sum of all elements as a (1,1,1,1) scalar.
template <typename S>
Var<S> sum(const Var<S>& x) {
  auto& tape = *x.tape();
  return tape.record(Tensor<S>::scalar(x.value().sum()), "sum", {x},
                     [](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       for (auto& v : gi[0]->data()) v += g[0];
                     });
}

template <typename S>
Var<S> relu(const Var<S>& x) {
  auto& tape = *x.tape();
  Tensor<S> out(x.dims());
  auto src = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = src[i] > S(0) ? src[i] : S(0);
  return tape.record(std::move(out), "relu", {x},
                     [](const Tensor<S>& g, const Tensor<S>& y, std::span<Tensor<S>* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (y[i] > S(0)) (*gi[0])[i] += g[i];
                     });
}

template <typename S>
Var<S> sigmoid(const Var<S>& x) {
  auto& tape = *x.tape();
  Tensor<S> out(x.dims());
  auto src = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = S(1) / (S(1) + std::exp(-src[i]));
  return tape.record(std::move(out), "sigmoid", {x},
                     [](const Tensor<S>& g, const Tensor<S>& y, std::span<Tensor<S>* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * y[i] * (S(1) - y[i]);
                     });
}

template <typename S>
Var<S> reshape(const Var<S>& x, const Shape& dims) {
  auto& tape = *x.tape();
  return tape.record(x.value().reshaped(dims), "reshape", {x},
                     [](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       auto dst = gi[0]->data();
                       for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
                     });
}

/// (N,C,H,W) -> (N,C*H*W,1,1), channel-major then spatial.
template <typename S>
Var<S> flatten(const Var<S>& x) {
  const auto& d = x.dims();
  return reshape(x, Shape{d[0], d[1] * d[2] * d[3], 1, 1});
}

/// Concatenation along the channel axis (axis 1), in argument order.
template <typename S>
Var<S> concat_channels(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw InputError("concat_channels: no inputs");
  auto& tape = *parts[0].tape();
  Shape d = parts[0].dims();
  std::size_t channels = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const auto& pd = p.dims();
    if (pd[0] != d[0] || pd[2] != d[2] || pd[3] != d[3]) {
      throw ShapeError("concat_channels: " + to_string(pd) + " vs " + to_string(d));
    }
    widths.push_back(pd[1]);
    channels += pd[1];
  }
  const std::size_t plane = d[2] * d[3];
  Tensor<S> out(Shape{d[0], channels, d[2], d[3]});
  for (std::size_t n = 0; n < d[0]; ++n) {
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto src = parts[k].value().data();
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(n * widths[k] * plane), widths[k] * plane,
                  out.data().begin() + static_cast<std::ptrdiff_t>((n * channels + c0) * plane));
      c0 += widths[k];
    }
  }
  return tape.record(std::move(out), "concat", parts,
                     [widths, channels, plane](const Tensor<S>& g, const Tensor<S>&,
                                               std::span<Tensor<S>* const> gi) {
                       const std::size_t batch = g.dim(0);
                       for (std::size_t n = 0; n < batch; ++n) {
                         std::size_t c0 = 0;
                         for (std::size_t k = 0; k < widths.size(); ++k) {
                           if (gi[k]) {
                             for (std::size_t i = 0; i < widths[k] * plane; ++i)
                               (*gi[k])[n * widths[k] * plane + i] += g[(n * channels + c0) * plane + i];
                           }
                           c0 += widths[k];
                         }
                       }
                     });
}

/// Multiplies every (n,c) plane of x by gate(n,c,0,0).
template <typename S>
Var<S> scale_channels(const Var<S>& x, const Var<S>& gate) {
  const auto& d = x.dims();
  if (gate.dims() != Shape{d[0], d[1], 1, 1}) {
    throw ShapeError("scale_channels: gate " + to_string(gate.dims()) + " for input " + to_string(d));
  }
  auto& tape = *x.tape();
  const Tensor<S>* xv = &x.value();
  const Tensor<S>* gv = &gate.value();
  const std::size_t plane = d[2] * d[3];
  Tensor<S> out(d);
  for (std::size_t nc = 0; nc < d[0] * d[1]; ++nc)
    for (std::size_t i = 0; i < plane; ++i) out[nc * plane + i] = (*xv)[nc * plane + i] * (*gv)[nc];
  return tape.record(std::move(out), "scale_channels", {x, gate},
                     [xv, gv, plane](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       const std::size_t planes = gv->size();
                       for (std::size_t nc = 0; nc < planes; ++nc) {
                         S acc = 0;
                         for (std::size_t i = 0; i < plane; ++i) {
                           const std::size_t k = nc * plane + i;
                           if (gi[0]) (*gi[0])[k] += g[k] * (*gv)[nc];
                           acc += g[k] * (*xv)[k];
                         }
                         if (gi[1]) (*gi[1])[nc] += acc;
                       }
                     });
}

/// Forward temporal difference along axis 2: out[t] = x[t+1] - x[t] for
/// t < T-1, and zero for the final frame.
template <typename S>
Tensor<S> temporal_difference_tensor(const Tensor<S>& x) {
  const auto& d = x.dims();
  if (d[2] < 2) throw InputError("temporal difference needs at least 2 frames, got " + std::to_string(d[2]));
  Tensor<S> out(d);
  for (std::size_t nc = 0; nc < d[0] * d[1]; ++nc)
    for (std::size_t t = 0; t + 1 < d[2]; ++t)
      for (std::size_t v = 0; v < d[3]; ++v) {
        const std::size_t k = (nc * d[2] + t) * d[3] + v;
        out[k] = x[k + d[3]] - x[k];
      }
  return out;
}

template <typename S>
Var<S> temporal_difference(const Var<S>& x) {
  auto& tape = *x.tape();
  return tape.record(temporal_difference_tensor(x.value()), "temporal_difference", {x},
                     [](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       const auto& d = g.dims();
                       auto& gx = *gi[0];
                       for (std::size_t nc = 0; nc < d[0] * d[1]; ++nc)
                         for (std::size_t t = 0; t + 1 < d[2]; ++t)
                           for (std::size_t v = 0; v < d[3]; ++v) {
                             const std::size_t k = (nc * d[2] + t) * d[3] + v;
                             gx[k + d[3]] += g[k];
                             gx[k] -= g[k];
                           }
                     });
}

/// Elementwise maximum over consecutive runs of rows along axis 0. Row r of
/// the output fuses `group_sizes[r]` input rows. Ties resolve to the earliest
/// row.
template <typename S>
Var<S> group_max(const Var<S>& x, const std::vector<std::size_t>& group_sizes) {
  const auto& d = x.dims();
  std::size_t total = 0;
  for (auto s : group_sizes) {
    if (s == 0) throw InputError("group_max: empty group");
    total += s;
  }
  if (group_sizes.empty() || total != d[0]) {
    throw ShapeError("group_max: group sizes cover " + std::to_string(total) + " rows, tensor has " +
                     std::to_string(d[0]));
  }
  auto& tape = *x.tape();
  const std::size_t row = d[1] * d[2] * d[3];
  Tensor<S> out(Shape{group_sizes.size(), d[1], d[2], d[3]});
  std::vector<std::size_t> argmax(out.size());
  const auto& xv = x.value();
  std::size_t first = 0;
  for (std::size_t gidx = 0; gidx < group_sizes.size(); ++gidx) {
    for (std::size_t i = 0; i < row; ++i) {
      std::size_t best = first * row + i;
      for (std::size_t r = first + 1; r < first + group_sizes[gidx]; ++r) {
        if (xv[r * row + i] > xv[best]) best = r * row + i;
      }
      out[gidx * row + i] = xv[best];
      argmax[gidx * row + i] = best;
    }
    first += group_sizes[gidx];
  }
  return tape.record(std::move(out), "group_max", {x},
                     [argmax = std::move(argmax)](const Tensor<S>& g, const Tensor<S>&,
                                                  std::span<Tensor<S>* const> gi) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[argmax[i]] += g[i];
                     });
}

}  // namespace tacnn
