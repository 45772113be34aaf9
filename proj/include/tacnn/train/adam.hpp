#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tacnn/nn/common.hpp"
#include "tacnn/train/config.hpp"

namespace tacnn {

/// First and second moments per parameter plus the step count. Moments are
/// allocated on the first step.
template <typename S>
struct AdamState {
  std::vector<Tensor<double>> m;
  std::vector<Tensor<double>> v;
  std::uint64_t step = 0;
};

/// One Adam update with bias correction. Weight decay is added to the
/// gradient (grad + wd * param) before the moments. Throws NumericError,
/// leaving parameters and state untouched, if any gradient is non-finite.
template <typename S>
void adam_step(const ParameterList<S>& params, AdamState<S>& state, double lr, double weight_decay,
               const AdamOptions& opt = {}) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->value.dims());
      state.v.emplace_back(p->value.dims());
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    if (p->grad.dims() != p->value.dims() || state.m[i].dims() != p->value.dims()) {
      throw ShapeError("adam: shape mismatch for " + p->name);
    }
    for (S g : p->grad.data()) {
      if (!std::isfinite(double(g))) throw NumericError("adam: non-finite gradient in " + p->name);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i]->value.data();
    const auto grad = params[i]->grad.data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = double(grad[k]) + weight_decay * double(value[k]);
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g;
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g * g;
      value[k] = S(double(value[k]) - lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt.eps));
    }
  }
}

}  // namespace tacnn
