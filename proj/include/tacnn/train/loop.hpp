#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>

#include "json.hpp"

#include "tacnn/augment/mix.hpp"
#include "tacnn/model/checkpoint.hpp"
#include "tacnn/train/adam.hpp"
#include "tacnn/train/config.hpp"
#include "tacnn/train/evaluate.hpp"

namespace tacnn {

struct EpochMetrics {
  std::size_t epoch = 0;
  double lr = 0;
  double loss = 0;
  double train_acc = 0;
  std::optional<double> val_acc;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

inline void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = {{"epoch", m.epoch}, {"lr", m.lr}, {"loss", m.loss}, {"train_acc", m.train_acc}};
  j["val_acc"] = m.val_acc ? nlohmann::json(*m.val_acc) : nlohmann::json(nullptr);
}

struct TrainHooks {
  const Dataset* validation = nullptr;
  std::ostream* metrics = nullptr;                     // JSONL, one line per epoch
  std::optional<std::filesystem::path> checkpoint;     // final state, or last good state on divergence
  bool stop_when_fit = false;                          // stop once eval-mode train accuracy is 100%
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  bool fit = false;
};

/// Mini-batch training: per epoch a seeded shuffle, batch mixing of the
/// shuffled batches, soft-target cross-entropy, Adam. train_acc is measured
/// in eval mode on the unmixed training set after the epoch. On a non-finite
/// loss or gradient the model is rolled back to the start of the epoch, that
/// state is checkpointed, and NumericError is thrown.
inline TrainResult train_loop(TaCnn<float>& model, const Dataset& data, const TrainConfig& cfg,
                              const BodyPartition& partition, const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw InputError("train: empty dataset");
  const std::size_t K = model.config().classes;
  for (const auto& s : data) {
    s.validate();
    if (s.classes() != K) throw InputError("sample " + s.id + " does not have " + std::to_string(K) + " classes");
  }
  partition.validate(model.config().joints);

  std::mt19937_64 rng(cfg.seed);
  model.reseed_dropout(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamState<float> adam;
  const auto params = model.parameters();
  std::vector<std::size_t> order(data.size());
  TrainResult result;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Checkpoint good = make_checkpoint(model, epoch);
    const double lr = lr_at(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        std::vector<SkeletonSample> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
        apply_batch_mix(batch, cfg.mix, partition, rng);

        std::vector<const SkeletonSample*> ptrs;
        Tensor<float> targets(Shape{batch.size(), K, 1, 1});
        for (std::size_t b = 0; b < batch.size(); ++b) {
          ptrs.push_back(&batch[b]);
          std::copy(batch[b].label.begin(), batch[b].label.end(), targets.data().begin() + std::ptrdiff_t(b * K));
        }
        Tape<float> tape;
        model.zero_grad();
        Var<float> loss =
            softmax_cross_entropy(model.forward(tape, std::span<const SkeletonSample* const>(ptrs), Mode::train), targets);
        const double value = loss.value()[0];
        if (!std::isfinite(value)) throw NumericError("non-finite loss");
        loss_sum += value * double(batch.size());
        tape.backward(loss);
        adam_step(params, adam, lr, cfg.weight_decay, cfg.adam);
      }
    } catch (const NumericError& e) {
      restore(model, good);
      std::string where;
      if (hooks.checkpoint) {
        save_checkpoint(*hooks.checkpoint, model, epoch);
        where = "; last good state saved to " + hooks.checkpoint->string();
      }
      throw NumericError("training diverged in epoch " + std::to_string(epoch) + " (" + e.what() + ")" + where);
    }

    EpochMetrics m{epoch, lr, loss_sum / double(data.size()), evaluate(model, data).accuracy(), std::nullopt};
    if (hooks.validation && !hooks.validation->empty()) m.val_acc = evaluate(model, *hooks.validation).accuracy();
    if (hooks.metrics) *hooks.metrics << nlohmann::json(m).dump() << '\n' << std::flush;
    if (hooks.on_epoch) hooks.on_epoch(m);
    result.history.push_back(m);
    if (m.train_acc == 1.0) result.fit = true;
    if (hooks.stop_when_fit && result.fit) break;
  }
  if (hooks.checkpoint) save_checkpoint(*hooks.checkpoint, model, result.history.size());
  return result;
}

}  // namespace tacnn
