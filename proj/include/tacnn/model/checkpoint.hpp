#pragma once

// Checkpoint layout (all integers little-endian):
//   "TACN" | u16 version | u32 n + n bytes of canonical JSON {"config", "step"}
//   | u32 tensor count | per tensor: u16 name length, name, 4 x u32 extents,
//   f32 data in row-major order.
// Trainable parameters come first in model order, then batch-norm running
// statistics.

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tacnn/io/binary.hpp"
#include "tacnn/model/ta_cnn.hpp"

namespace tacnn {

inline constexpr std::uint16_t checkpoint_version = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct Checkpoint {
  ModelConfig config;
  std::uint64_t step = 0;
  std::vector<NamedTensor> tensors;
};

/// Snapshot of a model's parameters and running statistics.
inline Checkpoint make_checkpoint(TaCnn<float>& model, std::uint64_t step) {
  Checkpoint ck{model.config(), step, {}};
  for (auto* p : model.parameters()) ck.tensors.push_back({p->name, p->value});
  for (auto* p : model.buffers()) ck.tensors.push_back({p->name, p->value});
  return ck;
}

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  out.write("TACN", 4);
  io::write_le(out, checkpoint_version);
  nlohmann::json header{{"config", ck.config}, {"step", ck.step}};
  const std::string text = header.dump();
  io::write_le(out, std::uint32_t(text.size()));
  out.write(text.data(), std::streamsize(text.size()));
  io::write_le(out, std::uint32_t(ck.tensors.size()));
  for (const auto& t : ck.tensors) {
    io::write_string16(out, t.name);
    for (auto e : t.value.dims()) io::write_le(out, std::uint32_t(e));
    for (float v : t.value.data()) io::write_f32(out, v);
  }
  if (!out) throw FormatError("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  io::expect_magic(in, "TACN");
  const auto version = io::read_le<std::uint16_t>(in, "checkpoint version");
  if (version != checkpoint_version) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto text = io::read_bytes(in, io::read_le<std::uint32_t>(in, "header length"), "checkpoint header");
  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(text);
    ck.config = header.at("config").get<ModelConfig>();
    ck.step = header.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = io::read_le<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = io::read_string16(in, "tensor name");
    Shape dims;
    for (auto& e : dims) e = io::read_le<std::uint32_t>(in, "tensor extents");
    try {
      validate_shape(dims);
    } catch (const ShapeError& e) {
      throw FormatError("tensor " + t.name + ": " + e.what());
    }
    t.value = Tensor<float>(dims);
    for (auto& v : t.value.data()) v = io::read_f32(in, "tensor data");
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

/// Copies checkpoint tensors into a model built from the same config.
/// Names and shapes must match one-to-one.
inline void restore(TaCnn<float>& model, const Checkpoint& ck) {
  if (!(model.config() == ck.config)) throw FormatError("checkpoint config does not match model");
  auto targets = model.parameters();
  auto buffers = model.buffers();
  targets.insert(targets.end(), buffers.begin(), buffers.end());
  if (targets.size() != ck.tensors.size()) {
    throw FormatError("checkpoint holds " + std::to_string(ck.tensors.size()) + " tensors, model needs " +
                      std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& src = ck.tensors[i];
    if (src.name != targets[i]->name || src.value.dims() != targets[i]->value.dims()) {
      throw FormatError("checkpoint tensor " + src.name + " " + to_string(src.value.dims()) + " does not match " +
                        targets[i]->name + " " + to_string(targets[i]->value.dims()));
    }
    targets[i]->value = src.value;
  }
}

inline void save_checkpoint(const std::filesystem::path& path, TaCnn<float>& model, std::uint64_t step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, make_checkpoint(model, step));
}

struct LoadedModel {
  std::unique_ptr<TaCnn<float>> model;
  std::uint64_t step = 0;
};

inline LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const auto ck = read_checkpoint(in);
  LoadedModel loaded{std::make_unique<TaCnn<float>>(ck.config), ck.step};
  restore(*loaded.model, ck);
  return loaded;
}

}  // namespace tacnn
