#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tacnn/core/tape.hpp"
#include "tacnn/nn/common.hpp"

namespace tacnn {

struct BatchNormSpec {
  std::size_t channels = 1;
  double epsilon = 1e-5;
  /// running <- momentum * running + (1 - momentum) * batch statistic
  double momentum = 0.9;
};

/// Per-channel normalisation over (N, H, W) followed by a learned affine map.
/// Running variance is tracked with the unbiased batch estimate.
template <typename S>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, const BatchNormSpec& spec)
      : spec_(spec),
        gamma_(name + ".gamma", Tensor<S>::ones(Shape{1, spec.channels, 1, 1})),
        beta_(name + ".beta", Tensor<S>(Shape{1, spec.channels, 1, 1})),
        running_mean_(name + ".running_mean", Tensor<S>(Shape{1, spec.channels, 1, 1})),
        running_var_(name + ".running_var", Tensor<S>::ones(Shape{1, spec.channels, 1, 1})) {}

  Var<S> forward(Tape<S>& tape, const Var<S>& x, Mode mode) {
    const auto& d = x.dims();
    if (d[1] != spec_.channels) {
      throw ShapeError("batchnorm: input has " + std::to_string(d[1]) + " channels, expected " +
                       std::to_string(spec_.channels));
    }
    return mode == Mode::train ? forward_train(tape, x) : forward_eval(tape, x);
  }

  const BatchNormSpec& spec() const { return spec_; }
  Parameter<S>& gamma() { return gamma_; }
  Parameter<S>& beta() { return beta_; }
  Parameter<S>& running_mean() { return running_mean_; }
  Parameter<S>& running_var() { return running_var_; }
  const Parameter<S>& running_mean() const { return running_mean_; }
  const Parameter<S>& running_var() const { return running_var_; }

  void collect(ParameterList<S>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  /// Non-trainable state persisted in checkpoints.
  void collect_buffers(ParameterList<S>& out) {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
  }

 private:
  Var<S> forward_train(Tape<S>& tape, const Var<S>& x) {
    const auto& xv = x.value();
    const auto& d = xv.dims();
    const std::size_t C = d[1], plane = d[2] * d[3], count = d[0] * plane;
    Tensor<S> xhat(d);
    std::vector<S> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) {
      S mean = 0;
      for (std::size_t n = 0; n < d[0]; ++n)
        for (std::size_t i = 0; i < plane; ++i) mean += xv[(n * C + c) * plane + i];
      mean /= S(count);
      S var = 0;
      for (std::size_t n = 0; n < d[0]; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
          const S dv = xv[(n * C + c) * plane + i] - mean;
          var += dv * dv;
        }
      var /= S(count);
      inv_std[c] = S(1) / std::sqrt(var + S(spec_.epsilon));
      for (std::size_t n = 0; n < d[0]; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t k = (n * C + c) * plane + i;
          xhat[k] = (xv[k] - mean) * inv_std[c];
        }
      const S m = S(spec_.momentum);
      const S unbiased = count > 1 ? var * S(count) / S(count - 1) : var;
      running_mean_.value[c] = m * running_mean_.value[c] + (S(1) - m) * mean;
      running_var_.value[c] = m * running_var_.value[c] + (S(1) - m) * unbiased;
    }
    Tensor<S> out(d);
    for (std::size_t n = 0; n < d[0]; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t k = (n * C + c) * plane + i;
          out[k] = gamma_.value[c] * xhat[k] + beta_.value[c];
        }
    const Var<S> g = tape.param(gamma_);
    const Var<S> b = tape.param(beta_);
    const Tensor<S>* gv = &g.value();
    return tape.record(
        std::move(out), "batchnorm_train", {x, g, b},
        [xhat = std::move(xhat), inv_std = std::move(inv_std), gv](const Tensor<S>& gout, const Tensor<S>&,
                                                                    std::span<Tensor<S>* const> gi) {
          const auto& d = gout.dims();
          const std::size_t C = d[1], plane = d[2] * d[3];
          const S count = S(d[0] * plane);
          for (std::size_t c = 0; c < C; ++c) {
            S sum_g = 0, sum_gx = 0;
            for (std::size_t n = 0; n < d[0]; ++n)
              for (std::size_t i = 0; i < plane; ++i) {
                const std::size_t k = (n * C + c) * plane + i;
                sum_g += gout[k];
                sum_gx += gout[k] * xhat[k];
              }
            if (gi[1]) (*gi[1])[c] += sum_gx;
            if (gi[2]) (*gi[2])[c] += sum_g;
            if (gi[0]) {
              const S scale = (*gv)[c] * inv_std[c] / count;
              for (std::size_t n = 0; n < d[0]; ++n)
                for (std::size_t i = 0; i < plane; ++i) {
                  const std::size_t k = (n * C + c) * plane + i;
                  (*gi[0])[k] += scale * (count * gout[k] - sum_g - xhat[k] * sum_gx);
                }
            }
          }
        });
  }

  Var<S> forward_eval(Tape<S>& tape, const Var<S>& x) {
    const Tensor<S>* xv = &x.value();
    const auto& d = xv->dims();
    const std::size_t C = d[1], plane = d[2] * d[3];
    std::vector<S> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) inv_std[c] = S(1) / std::sqrt(running_var_.value[c] + S(spec_.epsilon));
    Tensor<S> out(d);
    for (std::size_t n = 0; n < d[0]; ++n)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < plane; ++i) {
          const std::size_t k = (n * C + c) * plane + i;
          out[k] = gamma_.value[c] * (x.value()[k] - running_mean_.value[c]) * inv_std[c] + beta_.value[c];
        }
    const Var<S> g = tape.param(gamma_);
    const Var<S> b = tape.param(beta_);
    const Tensor<S>* gv = &g.value();
    std::vector<S> mean(running_mean_.value.data().begin(), running_mean_.value.data().end());
    return tape.record(std::move(out), "batchnorm_eval", {x, g, b},
                       [xv, gv, inv_std = std::move(inv_std), mean = std::move(mean)](
                           const Tensor<S>& gout, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                         const auto& d = gout.dims();
                         const std::size_t C = d[1], plane = d[2] * d[3];
                         for (std::size_t n = 0; n < d[0]; ++n)
                           for (std::size_t c = 0; c < C; ++c)
                             for (std::size_t i = 0; i < plane; ++i) {
                               const std::size_t k = (n * C + c) * plane + i;
                               const S xhat = ((*xv)[k] - mean[c]) * inv_std[c];
                               if (gi[0]) (*gi[0])[k] += gout[k] * (*gv)[c] * inv_std[c];
                               if (gi[1]) (*gi[1])[c] += gout[k] * xhat;
                               if (gi[2]) (*gi[2])[c] += gout[k];
                             }
                       });
  }

  BatchNormSpec spec_;
  Parameter<S> gamma_;
  Parameter<S> beta_;
  Parameter<S> running_mean_;
  Parameter<S> running_var_;
};

}  // namespace tacnn
