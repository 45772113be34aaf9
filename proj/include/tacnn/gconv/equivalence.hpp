#pragma once

// Graph convolution Y = W X A over the joint axis, and its realisation as an
// ordinary 1x1 convolution once joints are moved onto the channel axis.
//
// Worked 2-joint example of the weight transpose. With
//   A = [[a00, a01],
//        [a10, a11]]
// graph aggregation gives Y[.., v] = sum_u X[.., u] * A[u, v], so
//   Y[.., 1] = a01 * X[.., 0] + a11 * X[.., 1].
// A 1x1 convolution over joints-as-channels computes
//   Y[v, ..] = sum_u w[v, u] * X[u, ..],
// so output channel 1 needs w[1, 0] = a01 and w[1, 1] = a11, i.e. w = A^T.

#include <Eigen/Core>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "tacnn/core/ops.hpp"
#include "tacnn/nn/conv2d.hpp"

namespace tacnn {

/// Dense V x V joint-connectivity weights; arbitrary finite values allowed.
template <typename S>
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(std::size_t joints) : joints_(joints), data_(joints * joints, S(0)) {}

  /// Throws InputError unless rows form a square matrix of finite values.
  static AdjacencyMatrix from_rows(const std::vector<std::vector<S>>& rows) {
    AdjacencyMatrix a(rows.size());
    for (std::size_t u = 0; u < rows.size(); ++u) {
      if (rows[u].size() != rows.size()) {
        throw InputError("adjacency must be square: row " + std::to_string(u) + " has " +
                         std::to_string(rows[u].size()) + " entries, expected " + std::to_string(rows.size()));
      }
      for (std::size_t v = 0; v < rows.size(); ++v) {
        if (!std::isfinite(rows[u][v])) throw InputError("adjacency entries must be finite");
        a(u, v) = rows[u][v];
      }
    }
    return a;
  }

  static AdjacencyMatrix identity(std::size_t joints) {
    AdjacencyMatrix a(joints);
    for (std::size_t v = 0; v < joints; ++v) a(v, v) = S(1);
    return a;
  }

  template <typename Rng>
  static AdjacencyMatrix random(std::size_t joints, Rng& rng) {
    AdjacencyMatrix a(joints);
    std::uniform_real_distribution<S> dist(S(-1), S(1));
    for (auto& v : a.data_) v = dist(rng);
    return a;
  }

  std::size_t joints() const { return joints_; }
  S& operator()(std::size_t u, std::size_t v) { return data_[u * joints_ + v]; }
  S operator()(std::size_t u, std::size_t v) const { return data_[u * joints_ + v]; }
  const S* data() const { return data_.data(); }

 private:
  std::size_t joints_ = 0;
  std::vector<S> data_;
};

/// Optional feature transform W (C' x C, stored as (C', C, 1, 1)) plus the
/// adjacency A.
template <typename S>
struct GraphConvParams {
  std::optional<Tensor<S>> transform;
  AdjacencyMatrix<S> adjacency;
};

/// Y[n,c',t,v] = sum_c W[c',c] sum_u X[n,c,t,u] A[u,v]; without W the channel
/// mixing is skipped.
template <typename S>
Tensor<S> graph_conv(const Tensor<S>& x, const GraphConvParams<S>& params) {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  using Map = Eigen::Map<Mat>;
  const auto& d = x.dims();
  const std::size_t V = params.adjacency.joints();
  if (d[3] != V) {
    throw ShapeError("graph_conv: input has " + std::to_string(d[3]) + " joints, adjacency is " + std::to_string(V) +
                     "x" + std::to_string(V));
  }
  Tensor<S> mixed = x;
  if (params.transform) {
    const auto& w = *params.transform;
    if (w.dim(1) != d[1] || w.dim(2) != 1 || w.dim(3) != 1) {
      throw ShapeError("graph_conv: transform " + to_string(w.dims()) + " for " + std::to_string(d[1]) + " channels");
    }
    mixed = Tensor<S>(Shape{d[0], w.dim(0), d[2], d[3]});
    const auto TV = Eigen::Index(d[2] * d[3]);
    for (std::size_t n = 0; n < d[0]; ++n) {
      Map(mixed.data().data() + mixed.offset(n, 0, 0, 0), Eigen::Index(w.dim(0)), TV).noalias() =
          CMap(w.data().data(), Eigen::Index(w.dim(0)), Eigen::Index(d[1])) *
          CMap(x.data().data() + x.offset(n, 0, 0, 0), Eigen::Index(d[1]), TV);
    }
  }
  const auto& md = mixed.dims();
  Tensor<S> out(md);
  const auto rows = Eigen::Index(md[0] * md[1] * md[2]);
  Map(out.data().data(), rows, Eigen::Index(V)).noalias() =
      CMap(mixed.data().data(), rows, Eigen::Index(V)) * CMap(params.adjacency.data(), Eigen::Index(V), Eigen::Index(V));
  return out;
}

/// Kernel of the equivalent 1x1 convolution over joints-as-channels:
/// w[v, u] = A[u, v], shape (V, V, 1, 1).
template <typename S>
Tensor<S> adjacency_to_conv_weights(const AdjacencyMatrix<S>& a) {
  const std::size_t V = a.joints();
  if (V == 0) throw InputError("adjacency_to_conv_weights: empty adjacency");
  Tensor<S> w(Shape{V, V, 1, 1});
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t u = 0; u < V; ++u) w(v, u, 0, 0) = a(u, v);
  return w;
}

template <typename S>
Tensor<S> adjacency_to_conv_weights(const std::vector<std::vector<S>>& rows) {
  return adjacency_to_conv_weights(AdjacencyMatrix<S>::from_rows(rows));
}

/// The same operator computed purely with convolutions and transposes:
/// optional 1x1 conv over C, transpose (0,3,2,1), 1x1 conv over V with the
/// embedded adjacency, transpose back.
template <typename S>
Tensor<S> graph_conv_via_convolution(const Tensor<S>& x, const GraphConvParams<S>& params) {
  Tensor<S> h = x;
  if (params.transform) {
    const auto& w = *params.transform;
    auto spec = Conv2dSpec::pointwise(w.dim(1), w.dim(0));
    spec.bias = false;
    h = conv2d_tensor(h, w, nullptr, spec);
  }
  const std::size_t V = params.adjacency.joints();
  auto spec = Conv2dSpec::pointwise(V, V);
  spec.bias = false;
  const AxisOrder swap{0, 3, 2, 1};
  Tensor<S> joints_first = permute_tensor(h, swap);
  return permute_tensor(conv2d_tensor(joints_first, adjacency_to_conv_weights(params.adjacency), nullptr, spec), swap);
}

struct EquivOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  /// Use the identity adjacency instead of random weights.
  bool identity_adjacency = false;
  /// Alternate trials with a random feature transform W.
  bool with_transform = true;
  std::vector<std::size_t> joints{3, 5, 25};
  std::vector<std::size_t> channels{1, 3, 8};
  std::vector<std::size_t> frames{1, 4};
};

struct EquivReport {
  std::size_t trials = 0;
  std::size_t passed = 0;
  double max_abs_error = 0;
  double tolerance = 0;

  bool ok() const { return trials > 0 && passed == trials; }
};

/// Default pass threshold per precision.
template <typename S>
constexpr double equivalence_tolerance() {
  return sizeof(S) >= sizeof(double) ? 1e-12 : 1e-5;
}

/// Randomised comparison of graph_conv against graph_conv_via_convolution.
template <typename S>
EquivReport equiv_report(const EquivOptions& opt) {
  if (opt.trials == 0) throw InputError("equiv_report: trials must be >= 1");
  std::mt19937_64 rng(opt.seed);
  auto pick = [&](const std::vector<std::size_t>& from) {
    return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
  };
  EquivReport report;
  report.tolerance = equivalence_tolerance<S>();
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const std::size_t V = pick(opt.joints), C = pick(opt.channels), T = pick(opt.frames);
    const std::size_t N = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
    GraphConvParams<S> params;
    params.adjacency = opt.identity_adjacency ? AdjacencyMatrix<S>::identity(V) : AdjacencyMatrix<S>::random(V, rng);
    if (opt.with_transform && trial % 2 == 1) {
      const std::size_t out = pick(opt.channels);
      params.transform = Tensor<S>::uniform(Shape{out, C, 1, 1}, rng);
    }
    const auto x = Tensor<S>::uniform(Shape{N, C, T, V}, rng);
    const double err = double(max_abs_diff(graph_conv(x, params), graph_conv_via_convolution(x, params)));
    report.max_abs_error = std::max(report.max_abs_error, err);
    ++report.trials;
    if (err < report.tolerance) ++report.passed;
  }
  return report;
}

}  // namespace tacnn
