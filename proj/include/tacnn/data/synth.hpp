#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "tacnn/data/sample.hpp"

namespace tacnn {

struct SynthSpec {
  std::size_t classes = 4;
  std::size_t per_class = 16;
  std::size_t frames = 16;
  std::size_t joints = 5;
  std::size_t persons = 1;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

/// Class k moves every joint along a sinusoid with k + 1 cycles per clip,
/// a class phase pi * k / K and a class-specific amplitude pattern, on top
/// of a shared rest pose. Samples add phase and amplitude jitter plus
/// Gaussian noise. Samples are ordered round-robin over classes.
inline Dataset synth_dataset(const SynthSpec& spec) {
  if (spec.classes < 2) throw ConfigError("synth: need at least two classes");
  if (spec.per_class == 0 || spec.frames == 0 || spec.joints == 0 || spec.persons == 0) {
    throw ConfigError("synth: extents must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t C = 3, T = spec.frames, V = spec.joints, K = spec.classes;

  std::vector<double> rest(C * V);
  for (auto& r : rest) r = 0.5 * unit(rng);
  std::vector<double> amp(K * C * V);
  for (auto& a : amp) a = 0.4 + 0.2 * unit(rng);

  Dataset data;
  for (std::size_t i = 0; i < spec.per_class; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      SkeletonSample s{"synth-" + std::to_string(k) + "-" + std::to_string(i), one_hot(k, K),
                       Tensor<float>(Shape{spec.persons, C, T, V})};
      const double freq = double(k + 1);
      for (std::size_t p = 0; p < spec.persons; ++p) {
        const double phase = std::numbers::pi * double(k) / double(K) + 0.3 * unit(rng);
        const double scale = 1.0 + 0.2 * unit(rng);
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t t = 0; t < T; ++t)
            for (std::size_t v = 0; v < V; ++v) {
              const double angle = 2.0 * std::numbers::pi * freq * double(t) / double(T) + phase + 0.5 * double(v);
              const double x = rest[c * V + v] + scale * amp[(k * C + c) * V + v] * std::sin(angle) +
                               spec.noise * gauss(rng);
              s.joints(p, c, t, v) = float(x);
            }
      }
      data.push_back(std::move(s));
    }
  return data;
}

}  // namespace tacnn
