#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

#include "tacnn/core/tape.hpp"
#include "tacnn/core/tensor.hpp"
#include "tacnn/nn/common.hpp"

namespace tacnn {

struct Conv2dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t groups = 1;
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  bool bias = true;

  /// 1x1, ungrouped, with bias.
  static Conv2dSpec pointwise(std::size_t in, std::size_t out, std::size_t groups = 1) {
    return Conv2dSpec{in, out, 1, 1, groups, 1, 0, 0, true};
  }
  /// Odd kernel with "same" zero padding at stride 1.
  static Conv2dSpec same(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t groups = 1) {
    return Conv2dSpec{in, out, kh, kw, groups, 1, kh / 2, kw / 2, true};
  }

  void validate() const {
    if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0 || groups == 0) {
      throw ConfigError("conv2d: extents, stride and groups must be positive");
    }
    if (in_channels % groups != 0 || out_channels % groups != 0) {
      throw ConfigError("conv2d: channels " + std::to_string(in_channels) + "->" + std::to_string(out_channels) +
                        " not divisible by " + std::to_string(groups) + " groups");
    }
  }

  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
  Shape weight_shape() const { return Shape{out_channels, in_per_group(), kernel_h, kernel_w}; }
  Shape bias_shape() const { return Shape{1, out_channels, 1, 1}; }

  std::size_t param_count() const {
    return out_channels * in_per_group() * kernel_h * kernel_w + (bias ? out_channels : 0);
  }

  std::size_t out_h(std::size_t h) const { return out_extent(h, pad_h, kernel_h); }
  std::size_t out_w(std::size_t w) const { return out_extent(w, pad_w, kernel_w); }

  /// Multiply-accumulates for one sample of an h x w input.
  std::uint64_t macs(std::size_t h, std::size_t w) const {
    return std::uint64_t(out_channels) * out_h(h) * out_w(w) * in_per_group() * kernel_h * kernel_w;
  }

 private:
  std::size_t out_extent(std::size_t n, std::size_t pad, std::size_t k) const {
    if (n + 2 * pad < k) {
      throw ShapeError("conv2d: kernel " + std::to_string(k) + " larger than padded extent " +
                       std::to_string(n + 2 * pad));
    }
    return (n + 2 * pad - k) / stride + 1;
  }
};

namespace detail {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool is_plain_pointwise(const Conv2dSpec& s) {
  return s.kernel_h == 1 && s.kernel_w == 1 && s.stride == 1 && s.pad_h == 0 && s.pad_w == 0;
}

/// Unfolds the channels [c0, c0+cg) of sample n into a (cg*kh*kw) x (ho*wo)
/// patch matrix.
template <typename S>
void im2col(const Tensor<S>& x, std::size_t n, std::size_t c0, const Conv2dSpec& s, std::size_t ho,
            std::size_t wo, RowMat<S>& col) {
  const auto& d = x.dims();
  const std::size_t cg = s.in_per_group();
  col.resize(static_cast<Eigen::Index>(cg * s.kernel_h * s.kernel_w), static_cast<Eigen::Index>(ho * wo));
  S* dst = col.data();
  for (std::size_t c = 0; c < cg; ++c) {
    const S* plane = x.data().data() + x.offset(n, c0 + c, 0, 0);
    for (std::size_t p = 0; p < s.kernel_h; ++p)
      for (std::size_t q = 0; q < s.kernel_w; ++q)
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = std::ptrdiff_t(oh * s.stride + p) - std::ptrdiff_t(s.pad_h);
          const bool row_ok = ih >= 0 && ih < std::ptrdiff_t(d[2]);
          for (std::size_t ow = 0; ow < wo; ++ow) {
            const std::ptrdiff_t iw = std::ptrdiff_t(ow * s.stride + q) - std::ptrdiff_t(s.pad_w);
            *dst++ = (row_ok && iw >= 0 && iw < std::ptrdiff_t(d[3])) ? plane[std::size_t(ih) * d[3] + std::size_t(iw)]
                                                                     : S(0);
          }
        }
  }
}

template <typename S>
void col2im_add(const RowMat<S>& col, std::size_t n, std::size_t c0, const Conv2dSpec& s, std::size_t ho,
                std::size_t wo, Tensor<S>& gx) {
  const auto& d = gx.dims();
  const std::size_t cg = s.in_per_group();
  const S* src = col.data();
  for (std::size_t c = 0; c < cg; ++c) {
    S* plane = gx.data().data() + gx.offset(n, c0 + c, 0, 0);
    for (std::size_t p = 0; p < s.kernel_h; ++p)
      for (std::size_t q = 0; q < s.kernel_w; ++q)
        for (std::size_t oh = 0; oh < ho; ++oh) {
          const std::ptrdiff_t ih = std::ptrdiff_t(oh * s.stride + p) - std::ptrdiff_t(s.pad_h);
          const bool row_ok = ih >= 0 && ih < std::ptrdiff_t(d[2]);
          for (std::size_t ow = 0; ow < wo; ++ow, ++src) {
            const std::ptrdiff_t iw = std::ptrdiff_t(ow * s.stride + q) - std::ptrdiff_t(s.pad_w);
            if (row_ok && iw >= 0 && iw < std::ptrdiff_t(d[3])) plane[std::size_t(ih) * d[3] + std::size_t(iw)] += *src;
          }
        }
  }
}

inline void check_conv_operands(const Shape& x, const Shape& w, const std::optional<Shape>& b, const Conv2dSpec& s) {
  s.validate();
  if (x[1] != s.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(x[1]) + " channels, spec expects " +
                     std::to_string(s.in_channels));
  }
  if (w != s.weight_shape()) {
    throw ShapeError("conv2d: weights " + to_string(w) + ", expected " + to_string(s.weight_shape()));
  }
  if (s.bias != b.has_value() || (b && *b != s.bias_shape())) throw ShapeError("conv2d: bias does not match spec");
}

}  // namespace detail

/// Grouped 2-D cross-correlation with zero padding and stride.
/// x: (N, Cin, H, W), w: (Cout, Cin/groups, kh, kw), bias: (1, Cout, 1, 1).
template <typename S>
Tensor<S> conv2d_tensor(const Tensor<S>& x, const Tensor<S>& w, const std::type_identity_t<Tensor<S>>* bias,
                        const Conv2dSpec& s) {
  detail::check_conv_operands(x.dims(), w.dims(), bias ? std::optional<Shape>(bias->dims()) : std::nullopt, s);
  using Mat = detail::RowMat<S>;
  using Map = Eigen::Map<Mat>;
  using CMap = Eigen::Map<const Mat>;
  const auto& d = x.dims();
  const std::size_t ho = s.out_h(d[2]), wo = s.out_w(d[3]);
  const std::size_t cg = s.in_per_group(), og = s.out_per_group();
  const auto K = static_cast<Eigen::Index>(cg * s.kernel_h * s.kernel_w);
  const auto HW = static_cast<Eigen::Index>(ho * wo);
  Tensor<S> out(Shape{d[0], s.out_channels, ho, wo});
  Mat col;
  for (std::size_t n = 0; n < d[0]; ++n)
    for (std::size_t g = 0; g < s.groups; ++g) {
      CMap wg(w.data().data() + g * og * std::size_t(K), Eigen::Index(og), K);
      Map yg(out.data().data() + out.offset(n, g * og, 0, 0), Eigen::Index(og), HW);
      if (detail::is_plain_pointwise(s)) {
        CMap xg(x.data().data() + x.offset(n, g * cg, 0, 0), K, HW);
        yg.noalias() = wg * xg;
      } else {
        detail::im2col(x, n, g * cg, s, ho, wo, col);
        yg.noalias() = wg * col;
      }
      if (bias) {
        for (std::size_t o = 0; o < og; ++o) yg.row(Eigen::Index(o)).array() += (*bias)[g * og + o];
      }
    }
  return out;
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const std::optional<Var<S>>& bias, const Conv2dSpec& s) {
  auto& tape = *x.tape();
  const Tensor<S>* xv = &x.value();
  const Tensor<S>* wv = &w.value();
  Tensor<S> out = conv2d_tensor(*xv, *wv, bias ? &bias->value() : nullptr, s);
  tape.count_macs(std::uint64_t(xv->dim(0)) * s.macs(xv->dim(2), xv->dim(3)));
  std::vector<Var<S>> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  return tape.record(
      std::move(out), "conv2d", inputs,
      [xv, wv, s](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
        using Mat = detail::RowMat<S>;
        using Map = Eigen::Map<Mat>;
        using CMap = Eigen::Map<const Mat>;
        const auto& d = xv->dims();
        const std::size_t ho = g.dim(2), wo = g.dim(3);
        const std::size_t cg = s.in_per_group(), og = s.out_per_group();
        const auto K = static_cast<Eigen::Index>(cg * s.kernel_h * s.kernel_w);
        const auto HW = static_cast<Eigen::Index>(ho * wo);
        Tensor<S>* gx = gi[0];
        Tensor<S>* gw = gi[1];
        Tensor<S>* gb = gi.size() > 2 ? gi[2] : nullptr;
        Mat col, dcol;
        for (std::size_t n = 0; n < d[0]; ++n)
          for (std::size_t grp = 0; grp < s.groups; ++grp) {
            CMap dy(g.data().data() + g.offset(n, grp * og, 0, 0), Eigen::Index(og), HW);
            if (gb) {
              for (std::size_t o = 0; o < og; ++o) (*gb)[grp * og + o] += dy.row(Eigen::Index(o)).sum();
            }
            const bool plain = detail::is_plain_pointwise(s);
            if (gw) {
              Map dw(gw->data().data() + grp * og * std::size_t(K), Eigen::Index(og), K);
              if (plain) {
                CMap xg(xv->data().data() + xv->offset(n, grp * cg, 0, 0), K, HW);
                dw.noalias() += dy * xg.transpose();
              } else {
                detail::im2col(*xv, n, grp * cg, s, ho, wo, col);
                dw.noalias() += dy * col.transpose();
              }
            }
            if (gx) {
              CMap wg(wv->data().data() + grp * og * std::size_t(K), Eigen::Index(og), K);
              if (plain) {
                Map dx(gx->data().data() + gx->offset(n, grp * cg, 0, 0), K, HW);
                dx.noalias() += wg.transpose() * dy;
              } else {
                dcol.noalias() = wg.transpose() * dy;
                detail::col2im_add(dcol, n, grp * cg, s, ho, wo, *gx);
              }
            }
          }
      });
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& bias, const Conv2dSpec& s) {
  return conv2d(x, w, std::optional<Var<S>>(bias), s);
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Conv2dSpec& s) {
  return conv2d(x, w, std::optional<Var<S>>(), s);
}

/// Convolution layer owning its weights.
template <typename S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, const Conv2dSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    const std::size_t fan_in = spec_.in_per_group() * spec_.kernel_h * spec_.kernel_w;
    weight_ = Parameter<S>(name + ".weight", fan_in_uniform<S>(spec_.weight_shape(), fan_in, rng));
    if (spec_.bias) bias_ = Parameter<S>(name + ".bias", fan_in_uniform<S>(spec_.bias_shape(), fan_in, rng));
  }

  Var<S> forward(Tape<S>& tape, const Var<S>& x) {
    std::optional<Var<S>> b;
    if (spec_.bias) b = tape.param(bias_);
    return conv2d(x, tape.param(weight_), b, spec_);
  }

  const Conv2dSpec& spec() const { return spec_; }
  Parameter<S>& weight() { return weight_; }
  Parameter<S>& bias() { return bias_; }
  const Parameter<S>& weight() const { return weight_; }
  const Parameter<S>& bias() const { return bias_; }

  void collect(ParameterList<S>& out) {
    out.push_back(&weight_);
    if (spec_.bias) out.push_back(&bias_);
  }

 private:
  Conv2dSpec spec_;
  Parameter<S> weight_;
  Parameter<S> bias_;
};

}  // namespace tacnn
