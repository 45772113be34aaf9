#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <type_traits>
#include <vector>

#include "tacnn/core/tape.hpp"

namespace tacnn {

/// Builds a scalar loss on the given tape. Must be deterministic.
template <typename S>
using LossBuilder = std::function<Var<S>(Tape<S>&)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates probed per parameter tensor; 0 probes all of them.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

namespace detail {

template <typename S>
S evaluate_loss(const LossBuilder<S>& f) {
  Tape<S> tape;
  tape.set_grad_enabled(false);
  const S v = f(tape).value()[0];
  if (!std::isfinite(v)) throw NumericError("finite difference probe produced a non-finite loss");
  return v;
}

}  // namespace detail

/// Largest |analytic - central difference| / max(1, |analytic|) over the
/// probed coordinates of every parameter.
template <typename S>
double gradient_check(const LossBuilder<S>& f, const std::vector<Parameter<S>*>& params,
                      const GradCheckOptions& opt = {}) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<S> tape;
    tape.backward(f(tape));
  }
  std::mt19937_64 rng(opt.seed);
  double worst = 0;
  const S h = S(opt.step);
  for (auto* p : params) {
    if (!p->grad.all_finite()) throw NumericError("non-finite analytic gradient for " + p->name);
    std::vector<std::size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_tensor != 0 && coords.size() > opt.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords_per_tensor);
    }
    for (auto i : coords) {
      const S saved = p->value[i];
      p->value[i] = saved + h;
      const S up = detail::evaluate_loss(f);
      p->value[i] = saved - h;
      const S down = detail::evaluate_loss(f);
      p->value[i] = saved;
      const double numeric = (double(up) - double(down)) / (2.0 * double(h));
      const double analytic = double(p->grad[i]);
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    }
  }
  return worst;
}

/// Gradient check of f with respect to a single input tensor x.
template <typename S>
double finite_diff_check(const std::type_identity_t<std::function<Var<S>(Tape<S>&, const Var<S>&)>>& f,
                         const Tensor<S>& x,
                         double h = 1e-5) {
  if (!x.all_finite()) throw NumericError("finite_diff_check: non-finite input");
  Parameter<S> input("x", x);
  LossBuilder<S> loss = [&](Tape<S>& tape) { return f(tape, tape.param(input)); };
  GradCheckOptions opt;
  opt.step = h;
  return gradient_check<S>(loss, {&input}, opt);
}

}  // namespace tacnn
