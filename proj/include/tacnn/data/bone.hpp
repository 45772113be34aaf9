#pragma once

#include <vector>

#include "tacnn/data/sample.hpp"

namespace tacnn {

/// parent[j] for each joint; a root is its own parent. 0-indexed.
using ParentTable = std::vector<std::size_t>;

/// 25-joint Kinect v2 layout rooted at the spine shoulder (20).
inline ParentTable ntu25_parents() {
  return {1, 20, 20, 2, 20, 4, 5, 6, 20, 8, 9, 10, 0, 12, 13, 14, 0, 16, 17, 18, 20, 22, 7, 24, 11};
}

/// 20-joint Kinect v1 layout rooted at the hip centre (0).
inline ParentTable kinect20_parents() { return {0, 0, 1, 2, 2, 4, 5, 6, 2, 8, 9, 10, 0, 12, 13, 14, 0, 16, 17, 18}; }

/// 15-joint layout (head, neck, torso, arms, legs) rooted at the torso (2).
inline ParentTable sbu15_parents() { return {1, 2, 2, 1, 3, 4, 1, 6, 7, 2, 9, 10, 2, 12, 13}; }

inline ParentTable default_parents(std::size_t joints) {
  switch (joints) {
    case 25: return ntu25_parents();
    case 20: return kinect20_parents();
    case 15: return sbu15_parents();
    default: throw ConfigError("no default parent table for " + std::to_string(joints) + " joints");
  }
}

/// bone[j] = joint[j] - joint[parent(j)]; roots map to zero vectors.
inline SkeletonSample bone_transform(const SkeletonSample& s, const ParentTable& parents) {
  const auto& d = s.joints.dims();
  if (parents.size() != d[3]) {
    throw ConfigError("parent table has " + std::to_string(parents.size()) + " entries for " + std::to_string(d[3]) +
                      " joints");
  }
  for (auto p : parents)
    if (p >= d[3]) throw ConfigError("parent index out of range");
  SkeletonSample out = s;
  for (std::size_t m = 0; m < d[0]; ++m)
    for (std::size_t c = 0; c < d[1]; ++c)
      for (std::size_t t = 0; t < d[2]; ++t)
        for (std::size_t v = 0; v < d[3]; ++v) out.joints(m, c, t, v) = s.joints(m, c, t, v) - s.joints(m, c, t, parents[v]);
  return out;
}

}  // namespace tacnn
