#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tacnn/core/error.hpp"

namespace tacnn {

/// Extents of a rank-4 tensor, outermost first. The semantic label of each
/// axis (N,C,T,V or N,V,T,C) is the caller's business.
using Shape = std::array<std::size_t, 4>;

inline std::size_t element_count(const Shape& s) {
  return s[0] * s[1] * s[2] * s[3];
}

inline std::string to_string(const Shape& s) {
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) +
         "," + std::to_string(s[3]) + ")";
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << to_string(s); }

inline void validate_shape(const Shape& s) {
  for (auto e : s) {
    if (e == 0) throw ShapeError("tensor extents must be >= 1, got " + to_string(s));
  }
}

/// Dense row-major rank-4 array. Plain value type: copies are deep.
template <typename S>
class Tensor {
 public:
  using value_type = S;

  Tensor() : dims_{1, 1, 1, 1}, data_(1, S(0)) {}

  explicit Tensor(const Shape& dims, S fill = S(0)) : dims_(dims) {
    validate_shape(dims_);
    data_.assign(element_count(dims_), fill);
  }

  Tensor(const Shape& dims, std::vector<S> values) : dims_(dims), data_(std::move(values)) {
    validate_shape(dims_);
    if (data_.size() != element_count(dims_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match extents " + to_string(dims_));
    }
  }

  static Tensor zeros(const Shape& dims) { return Tensor(dims); }
  static Tensor ones(const Shape& dims) { return Tensor(dims, S(1)); }
  static Tensor full(const Shape& dims, S v) { return Tensor(dims, v); }
  static Tensor scalar(S v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  template <typename Rng>
  static Tensor uniform(const Shape& dims, Rng& rng, S lo = S(-1), S hi = S(1)) {
    Tensor t(dims);
    std::uniform_real_distribution<S> dist(lo, hi);
    for (auto& v : t.data_) v = dist(rng);
    return t;
  }

  template <typename Rng>
  static Tensor normal(const Shape& dims, Rng& rng, S mean = S(0), S stddev = S(1)) {
    Tensor t(dims);
    std::normal_distribution<S> dist(mean, stddev);
    for (auto& v : t.data_) v = dist(rng);
    return t;
  }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<S> data() noexcept { return data_; }
  std::span<const S> data() const noexcept { return data_; }
  const std::vector<S>& values() const noexcept { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
  }

  S& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[offset(n, c, h, w)];
  }
  S operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[offset(n, c, h, w)];
  }

  S& operator[](std::size_t i) noexcept { return data_[i]; }
  S operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Same data under new extents with equal element count.
  Tensor reshaped(const Shape& dims) const& {
    Tensor out(*this);
    out.reshape(dims);
    return out;
  }
  Tensor reshaped(const Shape& dims) && {
    reshape(dims);
    return std::move(*this);
  }

  void reshape(const Shape& dims) {
    validate_shape(dims);
    if (element_count(dims) != data_.size()) {
      throw ShapeError("cannot reshape " + to_string(dims_) + " to " + to_string(dims));
    }
    dims_ = dims;
  }

  void fill(S v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename T>
  Tensor<T> cast() const {
    std::vector<T> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](S v) { return static_cast<T>(v); });
    return Tensor<T>(dims_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](S v) { return std::isfinite(v); });
  }

  S sum() const { return std::accumulate(data_.begin(), data_.end(), S(0)); }

  /// Bitwise equality of extents and payload.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ &&
           std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(S)) == 0;
  }

 private:
  Shape dims_;
  std::vector<S> data_;
};

template <typename S>
S max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.dims() != b.dims()) {
    throw ShapeError("max_abs_diff: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
  S worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// Stacks tensors along axis 0. All other extents must agree.
template <typename S>
Tensor<S> stack_batch(std::span<const Tensor<S>> parts) {
  if (parts.empty()) throw InputError("stack_batch: no tensors");
  Shape d = parts[0].dims();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.dim(1) != d[1] || p.dim(2) != d[2] || p.dim(3) != d[3]) {
      throw ShapeError("stack_batch: " + to_string(p.dims()) + " vs " + to_string(d));
    }
    n += p.dim(0);
  }
  std::vector<S> data;
  data.reserve(n * d[1] * d[2] * d[3]);
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Tensor<S>(Shape{n, d[1], d[2], d[3]}, std::move(data));
}

/// Rows [begin, begin+count) along axis 0.
template <typename S>
Tensor<S> slice_batch(const Tensor<S>& x, std::size_t begin, std::size_t count) {
  const auto& d = x.dims();
  if (count == 0 || begin + count > d[0]) throw ShapeError("slice_batch: range out of bounds");
  const std::size_t row = d[1] * d[2] * d[3];
  std::vector<S> data(x.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                      x.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * row));
  return Tensor<S>(Shape{count, d[1], d[2], d[3]}, std::move(data));
}

}  // namespace tacnn
