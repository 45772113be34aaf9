#pragma once

#include <Eigen/Core>
#include <string>

#include "tacnn/core/tape.hpp"
#include "tacnn/nn/common.hpp"

namespace tacnn {

/// Fully connected map on flat rows: x (N, F, 1, 1), w (K, F, 1, 1),
/// b (1, K, 1, 1) -> (N, K, 1, 1).
template <typename S>
Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
  const auto& xd = x.dims();
  const auto& wd = w.dims();
  if (xd[2] != 1 || xd[3] != 1) throw ShapeError("linear: input must be flat, got " + to_string(xd));
  if (wd[1] != xd[1] || wd[2] != 1 || wd[3] != 1) {
    throw ShapeError("linear: weights " + to_string(wd) + " for input " + to_string(xd));
  }
  if (b.dims() != Shape{1, wd[0], 1, 1}) throw ShapeError("linear: bias " + to_string(b.dims()));
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  using Map = Eigen::Map<Mat>;
  auto& tape = *x.tape();
  const Tensor<S>* xv = &x.value();
  const Tensor<S>* wv = &w.value();
  const auto N = Eigen::Index(xd[0]), F = Eigen::Index(xd[1]), K = Eigen::Index(wd[0]);
  Tensor<S> out(Shape{xd[0], wd[0], 1, 1});
  Map y(out.data().data(), N, K);
  // One matrix-vector product per row keeps each row's result independent of N.
  CMap wm(wv->data().data(), K, F);
  for (Eigen::Index n = 0; n < N; ++n) {
    y.row(n).transpose().noalias() = wm * CMap(xv->data().data() + n * F, 1, F).transpose();
  }
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index k = 0; k < K; ++k) y(n, k) += b.value()[std::size_t(k)];
  tape.count_macs(std::uint64_t(N) * std::uint64_t(F) * std::uint64_t(K));
  return tape.record(std::move(out), "linear", {x, w, b},
                     [xv, wv, N, F, K](const Tensor<S>& g, const Tensor<S>&, std::span<Tensor<S>* const> gi) {
                       CMap dy(g.data().data(), N, K);
                       if (gi[0]) Map(gi[0]->data().data(), N, F).noalias() += dy * CMap(wv->data().data(), K, F);
                       if (gi[1]) Map(gi[1]->data().data(), K, F).noalias() += dy.transpose() * CMap(xv->data().data(), N, F);
                       if (gi[2]) {
                         for (Eigen::Index k = 0; k < K; ++k) (*gi[2])[std::size_t(k)] += dy.col(k).sum();
                       }
                     });
}

template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, Rng& rng)
      : in_(in),
        out_(out),
        weight_(name + ".weight", fan_in_uniform<S>(Shape{out, in, 1, 1}, in, rng)),
        bias_(name + ".bias", fan_in_uniform<S>(Shape{1, out, 1, 1}, in, rng)) {}

  Var<S> forward(Tape<S>& tape, const Var<S>& x) { return linear(x, tape.param(weight_), tape.param(bias_)); }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Parameter<S>& weight() { return weight_; }
  Parameter<S>& bias() { return bias_; }

  void collect(ParameterList<S>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Parameter<S> weight_;
  Parameter<S> bias_;
};

}  // namespace tacnn
