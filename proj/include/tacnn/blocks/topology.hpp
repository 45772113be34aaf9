#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tacnn/core/ops.hpp"
#include "tacnn/nn/batchnorm.hpp"
#include "tacnn/nn/conv2d.hpp"
#include "tacnn/nn/pooling.hpp"
#include "tacnn/nn/squeeze_excite.hpp"

namespace tacnn {

/// Named intermediate shapes collected during a forward pass.
struct ShapeTrace {
  std::vector<std::pair<std::string, Shape>> entries;

  void add(std::string name, const Shape& s) { entries.emplace_back(std::move(name), s); }
  const Shape& at(const std::string& name) const {
    for (const auto& [n, s] : entries)
      if (n == name) return s;
    throw InputError("no traced shape named " + name);
  }
};

inline void trace(ShapeTrace* t, const std::string& name, const Shape& s) {
  if (t) t->add(name, s);
}

/// Checks the grouping constraints shared by both blocks: n even, channels
/// divisible by n and by n/2.
inline void validate_grouping(std::size_t channels, std::size_t n) {
  if (n < 2 || n % 2 != 0) throw ConfigError("group count must be even and >= 2, got " + std::to_string(n));
  if (channels % n != 0 || channels % (n / 2) != 0) {
    throw ConfigError(std::to_string(channels) + " channels cannot be split into " + std::to_string(n) + " and " +
                      std::to_string(n / 2) + " groups");
  }
}

/// Sum of two grouped convolutions over the same input: branch A uses the
/// given kernel with n groups and same padding, branch B is 1x1 with n/2
/// groups.
template <typename S>
class DualGroupedConv {
 public:
  DualGroupedConv() = default;
  DualGroupedConv(const std::string& name, std::size_t channels, std::size_t n, std::size_t kh, std::size_t kw,
                  Rng& rng)
      : groups_(n) {
    validate_grouping(channels, n);
    branch_a_ = Conv2d<S>(name + ".branch_a", Conv2dSpec::same(channels, channels, kh, kw, n), rng);
    branch_b_ = Conv2d<S>(name + ".branch_b", Conv2dSpec::pointwise(channels, channels, n / 2), rng);
  }

  /// Explicit group counts per branch, e.g. (1, 1) for two dense branches.
  DualGroupedConv(const std::string& name, std::size_t channels, std::size_t groups_a, std::size_t groups_b,
                  std::size_t kh, std::size_t kw, Rng& rng)
      : groups_(groups_a) {
    branch_a_ = Conv2d<S>(name + ".branch_a", Conv2dSpec::same(channels, channels, kh, kw, groups_a), rng);
    branch_b_ = Conv2d<S>(name + ".branch_b", Conv2dSpec::pointwise(channels, channels, groups_b), rng);
  }

  Var<S> forward(Tape<S>& tape, const Var<S>& x) {
    return add(branch_a_.forward(tape, x), branch_b_.forward(tape, x));
  }

  std::size_t groups() const { return groups_; }
  Conv2d<S>& branch_a() { return branch_a_; }
  Conv2d<S>& branch_b() { return branch_b_; }

  void collect(ParameterList<S>& out) {
    branch_a_.collect(out);
    branch_b_.collect(out);
  }

 private:
  std::size_t groups_ = 0;
  Conv2d<S> branch_a_;
  Conv2d<S> branch_b_;
};

template <typename S>
struct BlockOutput {
  Var<S> output;
  std::optional<Var<S>> gate;  // absent when attention is disabled
};

struct CagSpec {
  std::size_t coords = 3;
  std::size_t hidden = 64;
  std::size_t grouped = 30;
  std::size_t out = 32;
  std::size_t groups = 10;
  bool attention = true;

  void validate() const { validate_grouping(grouped, groups); }
};

/// Coordinate aware grouping on (N, C, T, V): feature mapping
/// (1x1 -> BN -> ReLU -> 1x1), channel attention, dual coordinate-wise
/// convolution with a temporal 3x1 branch, and a 1x1 output mapping.
template <typename S>
class Cag {
 public:
  Cag() = default;
  Cag(const std::string& name, const CagSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    map_in_ = Conv2d<S>(name + ".map_in", Conv2dSpec::pointwise(spec.coords, spec.hidden), rng);
    bn_ = BatchNorm2d<S>(name + ".bn", BatchNormSpec{spec.hidden});
    map_mid_ = Conv2d<S>(name + ".map_mid", Conv2dSpec::pointwise(spec.hidden, spec.grouped), rng);
    attention_ = SqueezeExcite<S>(name + ".se", SqueezeExciteSpec{spec.grouped, 1}, rng);
    dual_ = DualGroupedConv<S>(name + ".dual", spec.grouped, spec.groups, 3, 1, rng);
    map_out_ = Conv2d<S>(name + ".map_out", Conv2dSpec::pointwise(spec.grouped, spec.out), rng);
  }

  BlockOutput<S> forward(Tape<S>& tape, const Var<S>& x, Mode mode, ShapeTrace* tr = nullptr,
                         const std::string& prefix = "cag") {
    if (x.dim(1) != spec_.coords) {
      throw ShapeError("CAG expects " + std::to_string(spec_.coords) + " coordinate channels, got " +
                       std::to_string(x.dim(1)));
    }
    trace(tr, prefix + ".input", x.dims());
    Var<S> h = relu(bn_.forward(tape, map_in_.forward(tape, x), mode));
    trace(tr, prefix + ".map_in", h.dims());
    h = map_mid_.forward(tape, h);
    trace(tr, prefix + ".map_mid", h.dims());
    BlockOutput<S> result;
    if (spec_.attention) {
      auto att = attention_.forward(tape, h);
      h = att.output;
      result.gate = att.gate;
    }
    trace(tr, prefix + ".attention", h.dims());
    h = dual_.forward(tape, h);
    trace(tr, prefix + ".dual", h.dims());
    h = map_out_.forward(tape, h);
    trace(tr, prefix + ".map_out", h.dims());
    result.output = h;
    return result;
  }

  const CagSpec& spec() const { return spec_; }
  Conv2d<S>& map_in() { return map_in_; }
  BatchNorm2d<S>& bn() { return bn_; }
  Conv2d<S>& map_mid() { return map_mid_; }
  SqueezeExcite<S>& attention() { return attention_; }
  DualGroupedConv<S>& dual() { return dual_; }
  Conv2d<S>& map_out() { return map_out_; }

  void collect(ParameterList<S>& out) {
    map_in_.collect(out);
    bn_.collect(out);
    map_mid_.collect(out);
    attention_.collect(out);
    dual_.collect(out);
    map_out_.collect(out);
  }
  void collect_buffers(ParameterList<S>& out) { bn_.collect_buffers(out); }

 private:
  CagSpec spec_;
  Conv2d<S> map_in_;
  BatchNorm2d<S> bn_;
  Conv2d<S> map_mid_;
  SqueezeExcite<S> attention_;
  DualGroupedConv<S> dual_;
  Conv2d<S> map_out_;
};

struct VagSpec {
  std::size_t joints = 25;
  std::size_t grouped = 30;
  std::size_t out = 32;
  std::size_t tail = 64;
  std::size_t groups = 6;
  bool attention = true;

  void validate() const { validate_grouping(grouped, groups); }
};

/// Virtual-part aware grouping on the transposed (N, V, T, C') tensor, where
/// joints act as channels. Same map-attend-group-map layout as CAG with a
/// 3x3 part-wise branch, followed by maxpool -> conv3x3 -> maxpool.
template <typename S>
class Vag {
 public:
  Vag() = default;
  Vag(const std::string& name, const VagSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    map_in_ = Conv2d<S>(name + ".map_in", Conv2dSpec::pointwise(spec.joints, spec.grouped), rng);
    attention_ = SqueezeExcite<S>(name + ".se", SqueezeExciteSpec{spec.grouped, 1}, rng);
    dual_ = DualGroupedConv<S>(name + ".dual", spec.grouped, spec.groups, 3, 3, rng);
    map_out_ = Conv2d<S>(name + ".map_out", Conv2dSpec::pointwise(spec.grouped, spec.out), rng);
    tail_ = Conv2d<S>(name + ".tail", Conv2dSpec::same(spec.out, spec.tail, 3, 3), rng);
  }

  BlockOutput<S> forward(Tape<S>& tape, const Var<S>& x, ShapeTrace* tr = nullptr,
                         const std::string& prefix = "vag") {
    if (x.dim(1) != spec_.joints) {
      throw ShapeError("VAG expects " + std::to_string(spec_.joints) + " joint channels, got " +
                       std::to_string(x.dim(1)));
    }
    trace(tr, prefix + ".input", x.dims());
    Var<S> h = map_in_.forward(tape, x);
    trace(tr, prefix + ".map_in", h.dims());
    BlockOutput<S> result;
    if (spec_.attention) {
      auto att = attention_.forward(tape, h);
      h = att.output;
      result.gate = att.gate;
    }
    trace(tr, prefix + ".attention", h.dims());
    h = dual_.forward(tape, h);
    trace(tr, prefix + ".dual", h.dims());
    h = map_out_.forward(tape, h);
    trace(tr, prefix + ".map_out", h.dims());
    h = max_pool2x2(tail_.forward(tape, max_pool2x2(h)));
    trace(tr, prefix + ".tail", h.dims());
    result.output = h;
    return result;
  }

  const VagSpec& spec() const { return spec_; }
  Conv2d<S>& map_in() { return map_in_; }
  SqueezeExcite<S>& attention() { return attention_; }
  DualGroupedConv<S>& dual() { return dual_; }
  Conv2d<S>& map_out() { return map_out_; }
  Conv2d<S>& tail() { return tail_; }

  void collect(ParameterList<S>& out) {
    map_in_.collect(out);
    attention_.collect(out);
    dual_.collect(out);
    map_out_.collect(out);
    tail_.collect(out);
  }

 private:
  VagSpec spec_;
  Conv2d<S> map_in_;
  SqueezeExcite<S> attention_;
  DualGroupedConv<S> dual_;
  Conv2d<S> map_out_;
  Conv2d<S> tail_;
};

}  // namespace tacnn
