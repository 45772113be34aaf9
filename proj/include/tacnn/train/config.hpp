#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tacnn/augment/mix.hpp"
#include "tacnn/model/config.hpp"

namespace tacnn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamOptions&, const AdamOptions&) = default;
};

struct TrainConfig {
  std::size_t epochs = 800;
  double lr = 0.001;
  double lr_decay = 0.1;
  std::vector<std::size_t> milestones{650, 730, 770};
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t warmup_epochs = 0;
  MixPolicy mix;
  AdamOptions adam;
  std::uint64_t seed = 0;

  /// Dataset profiles: ntu60, ntu120 (batch 64), nucla (16), sbu (8, weight
  /// decay 2e-4, 30 warmup epochs).
  static TrainConfig for_profile(const std::string& name) {
    TrainConfig c;
    if (name == "ntu60" || name == "ntu120") return c;
    if (name == "nucla") {
      c.batch_size = 16;
      return c;
    }
    if (name == "sbu") {
      c.batch_size = 8;
      c.weight_decay = 2e-4;
      c.warmup_epochs = 30;
      return c;
    }
    throw ConfigError("unknown training profile '" + name + "' (ntu60, ntu120, nucla, sbu)");
  }

  void validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must lie in (0,1]");
    if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (warmup_epochs >= epochs) throw ConfigError("train: warmup_epochs must be < epochs");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
      if (milestones[i] >= epochs) {
        throw ConfigError("train: milestone " + std::to_string(milestones[i]) + " not below epochs " +
                          std::to_string(epochs));
      }
      if (i && milestones[i] <= milestones[i - 1]) throw ConfigError("train: milestones must be strictly increasing");
    }
    if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 && adam.eps > 0)) {
      throw ConfigError("train: invalid Adam coefficients");
    }
    mix.validate();
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Linear ramp 0 -> lr over the warmup epochs, then lr * decay^k where k
/// counts the milestones already reached.
inline double lr_at(std::size_t epoch, const TrainConfig& c) {
  if (epoch < c.warmup_epochs) return c.lr * double(epoch) / double(c.warmup_epochs);
  std::size_t passed = 0;
  for (auto m : c.milestones) passed += epoch >= m;
  return c.lr * std::pow(c.lr_decay, double(passed));
}

inline void to_json(nlohmann::json& j, const AdamOptions& a) {
  j = {{"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

inline void from_json(const nlohmann::json& j, AdamOptions& a) {
  for (const auto& [key, value] : j.items()) {
    if (key == "beta1") a.beta1 = value.get<double>();
    else if (key == "beta2") a.beta2 = value.get<double>();
    else if (key == "eps") a.eps = value.get<double>();
    else throw ConfigError("unknown adam config key '" + key + "'");
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"lr", c.lr},
       {"lr_decay", c.lr_decay},
       {"milestones", c.milestones},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"warmup_epochs", c.warmup_epochs},
       {"mix", c.mix},
       {"adam", c.adam},
       {"seed", c.seed}};
}

/// A "profile" key selects the dataset defaults; other keys override them.
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  if (j.contains("profile")) c = TrainConfig::for_profile(j.at("profile").get<std::string>());
  for (const auto& [key, value] : j.items()) {
    if (key == "profile") continue;
    else if (key == "epochs") c.epochs = value.get<std::size_t>();
    else if (key == "lr") c.lr = value.get<double>();
    else if (key == "lr_decay") c.lr_decay = value.get<double>();
    else if (key == "milestones") c.milestones = value.get<std::vector<std::size_t>>();
    else if (key == "weight_decay") c.weight_decay = value.get<double>();
    else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
    else if (key == "warmup_epochs") c.warmup_epochs = value.get<std::size_t>();
    else if (key == "mix") c.mix = value.get<MixPolicy>();
    else if (key == "adam") c.adam = value.get<AdamOptions>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw ConfigError("unknown train config key '" + key + "'");
  }
}

/// Top-level config file: {"model": {...}, "train": {...}, "partition": {...}}.
/// Every section is optional; "partition" defaults by joint count.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::optional<BodyPartition> partition;

  BodyPartition body_partition() const { return partition ? *partition : BodyPartition::default_for(model.joints); }

  void validate() const {
    model.validate();
    train.validate();
    body_partition().validate(model.joints);
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"model", c.model}, {"train", c.train}};
  if (c.partition) j["partition"] = *c.partition;
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "model") c.model = value.get<ModelConfig>();
    else if (key == "train") c.train = value.get<TrainConfig>();
    else if (key == "partition") c.partition = value.get<BodyPartition>();
    else throw ConfigError("unknown config section '" + key + "'");
  }
}

/// Reads and validates a config file. JSON type errors become ConfigError.
inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    RunConfig c = nlohmann::json::parse(in).get<RunConfig>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace tacnn
