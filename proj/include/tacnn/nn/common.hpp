#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tacnn/core/tape.hpp"
#include "tacnn/core/tensor.hpp"

namespace tacnn {

enum class Mode { train, eval };

/// Deterministic generator shared by initialisers and dropout.
using Rng = std::mt19937_64;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for conv and
/// linear layers.
template <typename S>
Tensor<S> fan_in_uniform(const Shape& dims, std::size_t fan_in, Rng& rng) {
  const S bound = S(1) / std::sqrt(static_cast<S>(fan_in));
  return Tensor<S>::uniform(dims, rng, -bound, bound);
}

template <typename S>
using ParameterList = std::vector<Parameter<S>*>;

template <typename S>
using ConstParameterList = std::vector<const Parameter<S>*>;

}  // namespace tacnn
