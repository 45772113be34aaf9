#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tacnn/core/tensor.hpp"

namespace tacnn {

/// One labelled clip. `joints` is (persons, C, T, V); `label` is a
/// probability vector over the K classes (one-hot for raw data).
struct SkeletonSample {
  std::string id;
  std::vector<float> label;
  Tensor<float> joints;

  std::size_t persons() const { return joints.dim(0); }
  std::size_t coords() const { return joints.dim(1); }
  std::size_t frames() const { return joints.dim(2); }
  std::size_t num_joints() const { return joints.dim(3); }
  std::size_t classes() const { return label.size(); }

  /// Index of the largest label entry (first on ties).
  std::size_t label_class() const {
    return std::size_t(std::max_element(label.begin(), label.end()) - label.begin());
  }

  void validate() const {
    if (label.empty()) throw InputError("sample " + id + ": empty label");
    double total = 0;
    for (float v : label) {
      if (!(v >= 0.0f)) throw InputError("sample " + id + ": negative or non-finite label entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) throw InputError("sample " + id + ": label sums to " + std::to_string(total));
    if (!joints.all_finite()) throw InputError("sample " + id + ": non-finite coordinates");
  }

  friend bool operator==(const SkeletonSample& a, const SkeletonSample& b) {
    return a.id == b.id && a.label == b.label && a.joints == b.joints;
  }
};

using Dataset = std::vector<SkeletonSample>;

inline std::vector<float> one_hot(std::size_t k, std::size_t classes) {
  if (k >= classes) throw InputError("class index " + std::to_string(k) + " out of range for " + std::to_string(classes));
  std::vector<float> v(classes, 0.0f);
  v[k] = 1.0f;
  return v;
}

}  // namespace tacnn
