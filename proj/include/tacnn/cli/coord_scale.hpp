#pragma once

#include <ostream>
#include <random>
#include <vector>

#include "tacnn/augment/mix.hpp"
#include "tacnn/train/evaluate.hpp"

namespace tacnn {

struct ScaleTrial {
  std::vector<float> factors;  // one per coordinate channel
  double accuracy = 0;
};

/// Baseline row (all factors 1, unscaled data) followed by `trials` rows
/// whose per-coordinate factors are drawn uniformly from [0, 1] and applied
/// to every sample.
inline std::vector<ScaleTrial> coord_scale_experiment(TaCnn<float>& model, const Dataset& data, std::size_t trials,
                                                      std::uint64_t seed) {
  if (data.empty()) throw InputError("coord-scale: empty dataset");
  const std::size_t C = model.config().coords;
  std::vector<ScaleTrial> rows{{std::vector<float>(C, 1.0f), evaluate(model, data).accuracy()}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<float> s(C);
    for (auto& v : s) v = u(rng);
    Dataset scaled;
    scaled.reserve(data.size());
    for (const auto& x : data) scaled.push_back(scale_coordinates(x, s));
    rows.push_back({s, evaluate(model, scaled).accuracy()});
  }
  return rows;
}

/// Header s_x,s_y,s_z,accuracy (s_<c> beyond the third coordinate).
inline void write_coord_scale_csv(std::ostream& out, const std::vector<ScaleTrial>& rows) {
  const std::size_t C = rows.empty() ? 3 : rows.front().factors.size();
  const char* names[] = {"s_x", "s_y", "s_z"};
  for (std::size_t c = 0; c < C; ++c) out << (c < 3 ? std::string(names[c]) : "s_" + std::to_string(c)) << ',';
  out << "accuracy\n";
  const auto old = out.precision(9);
  for (const auto& r : rows) {
    for (float s : r.factors) out << s << ',';
    out << r.accuracy << '\n';
  }
  out.precision(old);
}

}  // namespace tacnn
