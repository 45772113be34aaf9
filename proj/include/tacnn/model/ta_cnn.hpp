#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tacnn/blocks/topology.hpp"
#include "tacnn/core/ops.hpp"
#include "tacnn/data/sample.hpp"
#include "tacnn/model/config.hpp"
#include "tacnn/nn/dropout.hpp"
#include "tacnn/nn/linear.hpp"
#include "tacnn/nn/loss.hpp"

namespace tacnn {

/// Motion stream input: forward temporal difference along T with a zero
/// final frame. x is (M, C, T, V).
template <typename S>
Tensor<S> motion_stream(const Tensor<S>& x) {
  return temporal_difference_tensor(x);
}

/// SE gates of the skeleton stream, one row per person.
template <typename S>
struct AttentionGates {
  std::optional<Var<S>> cag;
  std::optional<Var<S>> vag;
};

/// Stacked persons of a batch plus the per-sample person counts used by the
/// maxout fusion.
template <typename S>
struct PersonBatch {
  Tensor<S> persons;                 // (P, C, T, V)
  std::vector<std::size_t> counts;   // one entry per sample, summing to P
};

template <typename S>
PersonBatch<S> make_person_batch(std::span<const SkeletonSample* const> samples) {
  if (samples.empty()) throw InputError("empty batch");
  std::vector<Tensor<S>> parts;
  PersonBatch<S> batch;
  for (const auto* s : samples) {
    if (s->persons() == 0) throw InputError("sample " + s->id + " has no persons");
    parts.push_back(s->joints.template cast<S>());
    batch.counts.push_back(s->persons());
  }
  batch.persons = stack_batch<S>(parts);
  return batch;
}

/// Two-stream network: per stream CAG -> transpose -> VAG, concat, two 3x3
/// conv stages, temporal mean, maxout across persons, and a linear
/// classifier.
template <typename S>
class TaCnn {
 public:
  explicit TaCnn(const ModelConfig& config) : config_(config), rng_(config.seed) {
    config_.validate();
    Rng init(config.seed);
    CagSpec cag{config.coords, ModelConfig::cag_hidden, ModelConfig::grouped, ModelConfig::block_out, config.n_cag,
                config.attention};
    VagSpec vag{config.joints, ModelConfig::grouped, ModelConfig::block_out, ModelConfig::vag_tail, config.n_vag,
                config.attention};
    skeleton_cag_ = Cag<S>("skeleton.cag", cag, init);
    skeleton_vag_ = Vag<S>("skeleton.vag", vag, init);
    motion_cag_ = Cag<S>("motion.cag", cag, init);
    motion_vag_ = Vag<S>("motion.vag", vag, init);
    fuse_ = Conv2d<S>("convs.fuse", Conv2dSpec::same(2 * ModelConfig::vag_tail, ModelConfig::fused, 3, 3), init);
    head_ = Conv2d<S>("convs.head", Conv2dSpec::same(ModelConfig::fused, ModelConfig::head, 3, 3), init);
    fc_ = Linear<S>("fc", ModelConfig::feature_size, config.classes, init);
  }

  const ModelConfig& config() const { return config_; }

  /// Per-person features (P, 256, 1, 2) for stacked persons x (P, C, T, V).
  Var<S> forward_persons(Tape<S>& tape, const Var<S>& x, Mode mode, ShapeTrace* tr = nullptr,
                         AttentionGates<S>* gates = nullptr) {
    const auto& d = x.dims();
    if (d[1] != config_.coords || d[2] != config_.frames || d[3] != config_.joints) {
      throw ShapeError("model expects (P," + std::to_string(config_.coords) + "," + std::to_string(config_.frames) +
                       "," + std::to_string(config_.joints) + ") input, got " + to_string(d));
    }
    Var<S> motion = temporal_difference(x);
    auto skel = stream(tape, skeleton_cag_, skeleton_vag_, x, mode, tr, "skeleton");
    auto mot = stream(tape, motion_cag_, motion_vag_, motion, mode, tr, "motion");
    if (gates) {
      gates->cag = skel.cag_gate;
      gates->vag = skel.vag_gate;
    }
    Var<S> h = concat_channels<S>({skel.output, mot.output});
    trace(tr, "concat", h.dims());
    h = dropout(h, config_.dropout, mode, rng_);
    h = dropout(relu(max_pool2x2(fuse_.forward(tape, h))), config_.dropout, mode, rng_);
    trace(tr, "convs.fuse", h.dims());
    h = relu(max_pool2x2(head_.forward(tape, h)));
    trace(tr, "convs.head", h.dims());
    h = reduce_mean(h, 2);
    trace(tr, "mean", h.dims());
    return h;
  }

  /// Logits (B, K, 1, 1). `counts[b]` consecutive rows of `persons` belong to
  /// sample b and are fused by elementwise max.
  Var<S> forward(Tape<S>& tape, const Tensor<S>& persons, const std::vector<std::size_t>& counts, Mode mode,
                 ShapeTrace* tr = nullptr, AttentionGates<S>* gates = nullptr) {
    for (auto c : counts) {
      if (c == 0) throw InputError("sample with zero persons");
      if (c > config_.max_persons) {
        throw InputError("sample has " + std::to_string(c) + " persons, model allows " +
                         std::to_string(config_.max_persons));
      }
    }
    Var<S> x = tape.constant(persons);
    return forward_from(tape, x, counts, mode, tr, gates);
  }

  /// Same as forward but starting from a variable already on the tape, so
  /// callers can differentiate with respect to the input.
  Var<S> forward_from(Tape<S>& tape, const Var<S>& x, const std::vector<std::size_t>& counts, Mode mode,
                      ShapeTrace* tr = nullptr, AttentionGates<S>* gates = nullptr) {
    Var<S> feats = forward_persons(tape, x, mode, tr, gates);
    Var<S> fused = group_max(feats, counts);
    trace(tr, "maxout", fused.dims());
    Var<S> flat = dropout(flatten(fused), config_.dropout, mode, rng_);
    Var<S> logits = fc_.forward(tape, flat);
    trace(tr, "fc", logits.dims());
    return logits;
  }

  Var<S> forward(Tape<S>& tape, std::span<const SkeletonSample* const> samples, Mode mode) {
    auto batch = make_person_batch<S>(samples);
    return forward(tape, batch.persons, batch.counts, mode);
  }

  /// Eval-mode logits for one sample.
  std::vector<S> logits(const SkeletonSample& sample) {
    Tape<S> tape;
    tape.set_grad_enabled(false);
    const SkeletonSample* one[] = {&sample};
    Var<S> out = forward(tape, std::span<const SkeletonSample* const>(one), Mode::eval);
    return std::vector<S>(out.value().data().begin(), out.value().data().end());
  }

  std::vector<S> probabilities(const SkeletonSample& sample) {
    auto z = logits(sample);
    return softmax<S>(z);
  }

  /// Trainable parameters in a fixed order.
  ParameterList<S> parameters() {
    ParameterList<S> out;
    skeleton_cag_.collect(out);
    skeleton_vag_.collect(out);
    motion_cag_.collect(out);
    motion_vag_.collect(out);
    fuse_.collect(out);
    head_.collect(out);
    fc_.collect(out);
    return out;
  }

  /// Running statistics of the batch-norm layers.
  ParameterList<S> buffers() {
    ParameterList<S> out;
    skeleton_cag_.collect_buffers(out);
    motion_cag_.collect_buffers(out);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : parameters()) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  void reseed_dropout(std::uint64_t seed) { rng_.seed(seed); }

  Cag<S>& skeleton_cag() { return skeleton_cag_; }
  Vag<S>& skeleton_vag() { return skeleton_vag_; }
  Cag<S>& motion_cag() { return motion_cag_; }
  Vag<S>& motion_vag() { return motion_vag_; }
  Conv2d<S>& fuse() { return fuse_; }
  Conv2d<S>& head() { return head_; }
  Linear<S>& fc() { return fc_; }

 private:
  struct StreamOutput {
    Var<S> output;
    std::optional<Var<S>> cag_gate;
    std::optional<Var<S>> vag_gate;
  };

  StreamOutput stream(Tape<S>& tape, Cag<S>& cag, Vag<S>& vag, const Var<S>& x, Mode mode, ShapeTrace* tr,
                      const std::string& name) {
    auto c = cag.forward(tape, x, mode, tr, name + ".cag");
    Var<S> t = permute(c.output, AxisOrder{0, 3, 2, 1});
    trace(tr, name + ".transpose", t.dims());
    auto v = vag.forward(tape, t, tr, name + ".vag");
    return {v.output, c.gate, v.gate};
  }

  ModelConfig config_;
  Rng rng_;
  Cag<S> skeleton_cag_;
  Vag<S> skeleton_vag_;
  Cag<S> motion_cag_;
  Vag<S> motion_vag_;
  Conv2d<S> fuse_;
  Conv2d<S> head_;
  Linear<S> fc_;
};

/// Mean of the per-model softmax distributions.
template <typename S>
std::vector<S> ensemble_predict(std::span<TaCnn<S>* const> models, const SkeletonSample& sample) {
  if (models.empty()) throw InputError("ensemble_predict: no models");
  const auto& ref = models.front()->config();
  std::vector<S> mean(ref.classes, S(0));
  for (auto* m : models) {
    const auto& c = m->config();
    if (c.classes != ref.classes || c.coords != ref.coords || c.frames != ref.frames || c.joints != ref.joints) {
      throw ConfigError("ensemble_predict: models disagree on (C,T,V,K)");
    }
    const auto p = m->probabilities(sample);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
  }
  for (auto& v : mean) v /= S(models.size());
  return mean;
}

/// Mean of softmax distributions given per-model logits.
template <typename S>
std::vector<S> average_probabilities(const std::vector<std::vector<S>>& logits) {
  if (logits.empty()) throw InputError("average_probabilities: no models");
  std::vector<S> mean(logits.front().size(), S(0));
  for (const auto& z : logits) {
    if (z.size() != mean.size()) throw ConfigError("average_probabilities: class counts differ");
    const auto p = softmax<S>(z);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
  }
  for (auto& v : mean) v /= S(logits.size());
  return mean;
}

}  // namespace tacnn
