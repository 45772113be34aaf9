#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "tacnn/data/sample.hpp"

namespace tacnn {

/// Split of the joint axis into an upper and a lower body part.
struct BodyPartition {
  std::vector<std::size_t> upper;
  std::vector<std::size_t> lower;

  std::size_t joints() const { return upper.size() + lower.size(); }

  /// Throws ConfigError unless upper and lower are nonempty, disjoint and
  /// together cover 0..joints-1.
  void validate(std::size_t joints) const {
    if (upper.empty() || lower.empty()) throw ConfigError("body partition: both parts must be nonempty");
    std::vector<int> seen(joints, 0);
    for (const auto* part : {&upper, &lower})
      for (auto j : *part) {
        if (j >= joints) throw ConfigError("body partition: joint " + std::to_string(j) + " out of range");
        if (seen[j]++) throw ConfigError("body partition: joint " + std::to_string(j) + " listed twice");
      }
    if (upper.size() + lower.size() != joints) throw ConfigError("body partition does not cover every joint");
  }

  /// Everything not in `lower` becomes the upper part.
  static BodyPartition from_lower(std::size_t joints, std::vector<std::size_t> lower) {
    BodyPartition p;
    std::sort(lower.begin(), lower.end());
    for (std::size_t j = 0; j < joints; ++j)
      if (!std::binary_search(lower.begin(), lower.end(), j)) p.upper.push_back(j);
    p.lower = std::move(lower);
    p.validate(joints);
    return p;
  }

  /// Defaults: 25 joints (Kinect v2) lower = spine base + legs {0, 12..19};
  /// 20 joints (Kinect v1) lower = hip centre + legs {0, 12..19};
  /// 15 joints lower = torso + legs {2, 9..14}; otherwise the second half.
  static BodyPartition default_for(std::size_t joints) {
    auto range = [](std::size_t first, std::size_t last, std::vector<std::size_t> v) {
      for (std::size_t j = first; j <= last; ++j) v.push_back(j);
      return v;
    };
    switch (joints) {
      case 25:
      case 20:
        return from_lower(joints, range(12, 19, {0}));
      case 15:
        return from_lower(joints, range(9, 14, {2}));
      default:
        if (joints < 2) throw ConfigError("body partition needs at least two joints");
        return from_lower(joints, range(joints / 2 + joints % 2, joints - 1, {}));
    }
  }

  friend bool operator==(const BodyPartition&, const BodyPartition&) = default;
};

inline void to_json(nlohmann::json& j, const BodyPartition& p) { j = {{"upper", p.upper}, {"lower", p.lower}}; }
inline void from_json(const nlohmann::json& j, BodyPartition& p) {
  p.upper = j.at("upper").get<std::vector<std::size_t>>();
  p.lower = j.at("lower").get<std::vector<std::size_t>>();
}

enum class MixKind { skeleton, mixup };

struct MixPolicy {
  double lambda = 0.6;
  double alpha = 1.0 / 16.0;
  MixKind kind = MixKind::skeleton;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("mix: lambda must lie in [0,1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("mix: alpha must lie in [0,1]");
  }

  friend bool operator==(const MixPolicy&, const MixPolicy&) = default;
};

inline void to_json(nlohmann::json& j, const MixPolicy& m) {
  j = {{"lambda", m.lambda}, {"alpha", m.alpha}, {"kind", m.kind == MixKind::skeleton ? "skeleton" : "mixup"},
       {"seed", m.seed}};
}

inline void from_json(const nlohmann::json& j, MixPolicy& m) {
  for (const auto& [key, value] : j.items()) {
    if (key == "lambda") m.lambda = value.get<double>();
    else if (key == "alpha") m.alpha = value.get<double>();
    else if (key == "seed") m.seed = value.get<std::uint64_t>();
    else if (key == "kind") {
      const auto k = value.get<std::string>();
      if (k == "skeleton") m.kind = MixKind::skeleton;
      else if (k == "mixup") m.kind = MixKind::mixup;
      else throw ConfigError("mix: unknown kind '" + k + "'");
    } else {
      throw ConfigError("unknown mix config key '" + key + "'");
    }
  }
}

namespace detail {

inline void check_same_layout(const SkeletonSample& a, const SkeletonSample& b) {
  if (a.joints.dims() != b.joints.dims()) {
    throw InputError("cannot mix " + a.id + " " + to_string(a.joints.dims()) + " with " + b.id + " " +
                     to_string(b.joints.dims()));
  }
  if (a.label.size() != b.label.size()) throw InputError("cannot mix samples with different class counts");
}

inline std::vector<float> blend_labels(const std::vector<float>& a, const std::vector<float>& b, double lambda) {
  std::vector<float> y(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) y[k] = float(lambda * double(a[k]) + (1.0 - lambda) * double(b[k]));
  return y;
}

/// b with its persons cycled to match `persons` rows.
inline SkeletonSample with_persons(const SkeletonSample& b, std::size_t persons) {
  if (b.persons() == persons) return b;
  std::vector<Tensor<float>> rows;
  for (std::size_t p = 0; p < persons; ++p) rows.push_back(slice_batch(b.joints, p % b.persons(), 1));
  SkeletonSample out = b;
  out.joints = stack_batch<float>(rows);
  return out;
}

}  // namespace detail

/// Upper-body joints from a, lower-body joints from b, for every person,
/// coordinate and frame; label lambda * y_a + (1 - lambda) * y_b.
inline SkeletonSample skeleton_mix(const SkeletonSample& a, const SkeletonSample& b, const BodyPartition& part,
                                   double lambda) {
  detail::check_same_layout(a, b);
  part.validate(a.num_joints());
  SkeletonSample out{a.id + "+" + b.id, detail::blend_labels(a.label, b.label, lambda), a.joints};
  const auto& d = a.joints.dims();
  for (std::size_t p = 0; p < d[0]; ++p)
    for (std::size_t c = 0; c < d[1]; ++c)
      for (std::size_t t = 0; t < d[2]; ++t)
        for (auto v : part.lower) out.joints(p, c, t, v) = b.joints(p, c, t, v);
  return out;
}

/// Elementwise blend of coordinates and labels.
inline SkeletonSample vanilla_mixup(const SkeletonSample& a, const SkeletonSample& b, double lambda) {
  detail::check_same_layout(a, b);
  SkeletonSample out{a.id + "+" + b.id, detail::blend_labels(a.label, b.label, lambda), a.joints};
  for (std::size_t i = 0; i < out.joints.size(); ++i) {
    out.joints[i] = float(lambda * double(a.joints[i]) + (1.0 - lambda) * double(b.joints[i]));
  }
  return out;
}

/// Replaces floor(alpha * B) randomly chosen samples by a mix with a random
/// distinct partner from the original batch. Partners with a different
/// person count have their persons cycled to match. Returns the mixed
/// positions in ascending order.
template <typename Rng>
std::vector<std::size_t> apply_batch_mix(std::vector<SkeletonSample>& batch, const MixPolicy& policy,
                                         const BodyPartition& part, Rng& rng) {
  policy.validate();
  const std::size_t count = std::size_t(std::floor(policy.alpha * double(batch.size()) + 1e-9));
  if (count == 0) return {};
  if (batch.size() < 2) throw InputError("batch mixing needs at least two samples");
  const std::vector<SkeletonSample> original = batch;
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(count);
  std::sort(order.begin(), order.end());
  std::uniform_int_distribution<std::size_t> pick(0, batch.size() - 2);
  for (auto i : order) {
    std::size_t j = pick(rng);
    if (j >= i) ++j;
    const auto partner = detail::with_persons(original[j], original[i].persons());
    batch[i] = policy.kind == MixKind::skeleton ? skeleton_mix(original[i], partner, part, policy.lambda)
                                                : vanilla_mixup(original[i], partner, policy.lambda);
  }
  return order;
}

using WarningSink = std::function<void(const std::string&)>;

inline void warn_to_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

/// Multiplies coordinate channel c by s[c]. Factors outside [0,1] are
/// reported through `warn` but still applied.
inline SkeletonSample scale_coordinates(const SkeletonSample& x, const std::vector<float>& s,
                                        const WarningSink& warn = warn_to_stderr) {
  if (s.size() != x.coords()) {
    throw InputError("scale_coordinates: " + std::to_string(s.size()) + " factors for " + std::to_string(x.coords()) +
                     " coordinates");
  }
  for (std::size_t c = 0; c < s.size(); ++c) {
    if (!(s[c] >= 0.0f && s[c] <= 1.0f) && warn) {
      warn("scale factor " + std::to_string(s[c]) + " for coordinate " + std::to_string(c) + " outside [0,1]");
    }
  }
  SkeletonSample out = x;
  const auto& d = x.joints.dims();
  for (std::size_t p = 0; p < d[0]; ++p)
    for (std::size_t c = 0; c < d[1]; ++c)
      for (std::size_t t = 0; t < d[2]; ++t)
        for (std::size_t v = 0; v < d[3]; ++v) out.joints(p, c, t, v) = x.joints(p, c, t, v) * s[c];
  return out;
}

}  // namespace tacnn
