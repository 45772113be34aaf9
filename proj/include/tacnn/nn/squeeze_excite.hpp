#pragma once

#include <string>

#include "tacnn/core/ops.hpp"
#include "tacnn/nn/linear.hpp"

namespace tacnn {

struct SqueezeExciteSpec {
  std::size_t channels = 1;
  std::size_t reduction = 1;

  void validate() const {
    if (channels == 0 || reduction == 0 || channels % reduction != 0) {
      throw ConfigError("squeeze-excite: channels " + std::to_string(channels) + " not divisible by reduction " +
                        std::to_string(reduction));
    }
  }
  std::size_t hidden() const { return channels / reduction; }
  std::size_t param_count() const { return 2 * channels * hidden() + hidden() + channels; }
  std::uint64_t macs() const { return 2ull * channels * hidden(); }
};

template <typename S>
struct AttentionOutput {
  Var<S> output;
  Var<S> gate;  // (N, C, 1, 1), values in (0, 1)
};

/// Channel attention: mean-pool over (H, W), C -> C/r -> ReLU -> C ->
/// sigmoid, then scale each channel of the input by its gate.
template <typename S>
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(std::string name, const SqueezeExciteSpec& spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    squeeze_ = Linear<S>(name + ".fc1", spec.channels, spec.hidden(), rng);
    excite_ = Linear<S>(name + ".fc2", spec.hidden(), spec.channels, rng);
  }

  AttentionOutput<S> forward(Tape<S>& tape, const Var<S>& x) {
    const auto& d = x.dims();
    if (d[1] != spec_.channels) {
      throw ShapeError("squeeze-excite: input has " + std::to_string(d[1]) + " channels, expected " +
                       std::to_string(spec_.channels));
    }
    Var<S> pooled = reduce_mean(reduce_mean(x, 3), 2);
    Var<S> h = relu(squeeze_.forward(tape, pooled));
    Var<S> gate = sigmoid(excite_.forward(tape, h));
    return {scale_channels(x, gate), gate};
  }

  const SqueezeExciteSpec& spec() const { return spec_; }
  Linear<S>& squeeze() { return squeeze_; }
  Linear<S>& excite() { return excite_; }

  void collect(ParameterList<S>& out) {
    squeeze_.collect(out);
    excite_.collect(out);
  }

 private:
  SqueezeExciteSpec spec_;
  Linear<S> squeeze_;
  Linear<S> excite_;
};

}  // namespace tacnn
