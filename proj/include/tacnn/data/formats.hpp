#pragma once

// SKB1: "SKB1" | u16 version | records until EOF. A record is
//   u16 id length, id bytes, u32 K, f32 label[K], u32 M, u32 C, u32 T, u32 V,
//   f32 data[M*C*T*V] row-major; all little-endian.
// JSONL: one object per line {"id", "label", "joints"} with joints nested
// [M][C][T][V].

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "tacnn/data/sample.hpp"
#include "tacnn/io/binary.hpp"

namespace tacnn {

inline constexpr std::uint16_t skb1_version = 1;

inline void write_skb1(std::ostream& out, const Dataset& data) {
  out.write("SKB1", 4);
  io::write_le(out, skb1_version);
  for (const auto& s : data) {
    io::write_string16(out, s.id);
    io::write_le(out, std::uint32_t(s.label.size()));
    for (float v : s.label) io::write_f32(out, v);
    for (auto e : s.joints.dims()) io::write_le(out, std::uint32_t(e));
    for (float v : s.joints.data()) io::write_f32(out, v);
  }
  if (!out) throw FormatError("failed writing SKB1 stream");
}

inline Dataset read_skb1(std::istream& in) {
  io::expect_magic(in, "SKB1");
  const auto version = io::read_le<std::uint16_t>(in, "SKB1 version");
  if (version != skb1_version) throw FormatError("unsupported SKB1 version " + std::to_string(version));
  Dataset data;
  while (in.peek() != std::char_traits<char>::eof()) {
    SkeletonSample s;
    s.id = io::read_string16(in, "sample id");
    const auto K = io::read_le<std::uint32_t>(in, "class count");
    if (K == 0) throw FormatError("sample " + s.id + ": zero-length label");
    s.label.resize(K);
    for (auto& v : s.label) v = io::read_f32(in, "label");
    Shape dims;
    for (auto& e : dims) e = io::read_le<std::uint32_t>(in, "joint extents");
    try {
      validate_shape(dims);
    } catch (const ShapeError& e) {
      throw FormatError("sample " + s.id + ": " + e.what());
    }
    s.joints = Tensor<float>(dims);
    for (auto& v : s.joints.data()) v = io::read_f32(in, "joint data");
    data.push_back(std::move(s));
  }
  return data;
}

inline nlohmann::json sample_to_json(const SkeletonSample& s) {
  const auto& d = s.joints.dims();
  nlohmann::json joints = nlohmann::json::array();
  for (std::size_t p = 0; p < d[0]; ++p) {
    nlohmann::json pc = nlohmann::json::array();
    for (std::size_t c = 0; c < d[1]; ++c) {
      nlohmann::json ct = nlohmann::json::array();
      for (std::size_t t = 0; t < d[2]; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t v = 0; v < d[3]; ++v) row.push_back(double(s.joints(p, c, t, v)));
        ct.push_back(std::move(row));
      }
      pc.push_back(std::move(ct));
    }
    joints.push_back(std::move(pc));
  }
  std::vector<double> label(s.label.begin(), s.label.end());
  return {{"id", s.id}, {"label", label}, {"joints", joints}};
}

/// Throws FormatError when the nested joint array is ragged.
inline SkeletonSample sample_from_json(const nlohmann::json& j) {
  SkeletonSample s;
  s.id = j.at("id").get<std::string>();
  for (double v : j.at("label").get<std::vector<double>>()) s.label.push_back(float(v));
  const auto& joints = j.at("joints");
  auto extent = [](const nlohmann::json& a, const char* axis) {
    if (!a.is_array() || a.empty()) throw FormatError(std::string("joints: empty or non-array ") + axis + " axis");
    return a.size();
  };
  Shape dims{extent(joints, "person"), extent(joints[0], "coordinate"), extent(joints[0][0], "frame"),
             extent(joints[0][0][0], "joint")};
  s.joints = Tensor<float>(dims);
  for (std::size_t p = 0; p < dims[0]; ++p) {
    if (joints[p].size() != dims[1]) throw FormatError("joints: ragged coordinate axis");
    for (std::size_t c = 0; c < dims[1]; ++c) {
      if (joints[p][c].size() != dims[2]) throw FormatError("joints: ragged frame axis");
      for (std::size_t t = 0; t < dims[2]; ++t) {
        const auto& row = joints[p][c][t];
        if (row.size() != dims[3]) throw FormatError("joints: ragged joint axis");
        for (std::size_t v = 0; v < dims[3]; ++v) s.joints(p, c, t, v) = float(row[v].get<double>());
      }
    }
  }
  return s;
}

inline void write_jsonl(std::ostream& out, const Dataset& data) {
  for (const auto& s : data) out << sample_to_json(s).dump() << '\n';
  if (!out) throw FormatError("failed writing JSONL stream");
}

inline Dataset read_jsonl(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      data.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), n);
    } catch (const FormatError& e) {
      throw ParseError(e.what(), n);
    }
  }
  return data;
}

enum class DataFormat { skb1, jsonl };

/// By extension: .jsonl -> JSONL, anything else -> SKB1.
inline DataFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".jsonl" ? DataFormat::jsonl : DataFormat::skb1;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  return format_for(path) == DataFormat::jsonl ? read_jsonl(in) : read_skb1(in);
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  if (format_for(path) == DataFormat::jsonl) write_jsonl(out, data);
  else write_skb1(out, data);
}

}  // namespace tacnn
