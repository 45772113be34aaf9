#pragma once

#include <string>

#include "json.hpp"

#include "tacnn/core/error.hpp"

namespace tacnn {

/// Network hyper-parameters. Layer widths follow the reference
/// architecture; only the data-dependent extents and group counts vary.
struct ModelConfig {
  std::size_t coords = 3;
  std::size_t frames = 64;
  std::size_t joints = 25;
  std::size_t classes = 60;
  std::size_t max_persons = 2;
  std::size_t n_cag = 10;
  std::size_t n_vag = 6;
  double dropout = 0.5;
  bool attention = true;
  std::uint64_t seed = 0;

  // Fixed widths of the reference network.
  static constexpr std::size_t cag_hidden = 64;
  static constexpr std::size_t grouped = 30;
  static constexpr std::size_t block_out = 32;
  static constexpr std::size_t vag_tail = 64;
  static constexpr std::size_t fused = 128;
  static constexpr std::size_t head = 256;

  /// Width of the feature map after mean pooling: block_out halved four times.
  static constexpr std::size_t head_width = block_out / 16;
  static constexpr std::size_t feature_size = head * head_width;

  void validate() const {
    if (coords == 0 || joints == 0) throw ConfigError("model: coords and joints must be positive");
    if (classes < 1) throw ConfigError("model: need at least one class");
    if (max_persons < 1) throw ConfigError("model: max_persons must be >= 1");
    if (frames < 16 || frames % 16 != 0) {
      throw ConfigError("model: frames must be a positive multiple of 16 (four 2x poolings), got " +
                        std::to_string(frames));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0,1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"coords", c.coords},   {"frames", c.frames},           {"joints", c.joints},
                     {"classes", c.classes}, {"max_persons", c.max_persons}, {"n_cag", c.n_cag},
                     {"n_vag", c.n_vag},     {"dropout", c.dropout},         {"attention", c.attention},
                     {"seed", c.seed}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "coords") c.coords = value.get<std::size_t>();
    else if (key == "frames") c.frames = value.get<std::size_t>();
    else if (key == "joints") c.joints = value.get<std::size_t>();
    else if (key == "classes") c.classes = value.get<std::size_t>();
    else if (key == "max_persons") c.max_persons = value.get<std::size_t>();
    else if (key == "n_cag") c.n_cag = value.get<std::size_t>();
    else if (key == "n_vag") c.n_vag = value.get<std::size_t>();
    else if (key == "dropout") c.dropout = value.get<double>();
    else if (key == "attention") c.attention = value.get<bool>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw ConfigError("unknown model config key '" + key + "'");
  }
}

}  // namespace tacnn
