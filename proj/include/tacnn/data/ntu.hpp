#pragma once

// Reader for the public NTU RGB+D `.skeleton` text layout:
//   <frame count>
//   per frame:  <body count>
//     per body: <body id> <metadata...>
//               <joint count>
//               per joint: <x> <y> <z> <auxiliary...>
// Only body ids and 3-D joint positions are kept.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "tacnn/data/sample.hpp"

namespace tacnn {

struct RawBody {
  std::string id;
  std::vector<std::array<float, 3>> joints;
};

struct RawFrame {
  std::vector<RawBody> bodies;
};

struct RawSequence {
  std::vector<RawFrame> frames;

  std::size_t max_bodies() const {
    std::size_t m = 0;
    for (const auto& f : frames) m = std::max(m, f.bodies.size());
    return m;
  }
};

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next non-blank line split into tokens; throws ParseError at EOF.
  std::vector<std::string> tokens(const char* expecting) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      std::istringstream ss(line);
      std::vector<std::string> out;
      for (std::string tok; ss >> tok;) out.push_back(tok);
      if (!out.empty()) return out;
    }
    throw ParseError(std::string("unexpected end of file, expected ") + expecting, line_ + 1);
  }

  std::size_t count(const char* what) {
    auto t = tokens(what);
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(t[0], &pos);
      if (pos != t[0].size() || v < 0 || t.size() != 1) throw std::invalid_argument(what);
      return std::size_t(v);
    } catch (const std::logic_error&) {
      throw ParseError(std::string("expected ") + what + ", got '" + t[0] + "'", line_);
    }
  }

  float number(const std::string& tok, const char* what) {
    try {
      std::size_t pos = 0;
      const float v = std::stof(tok, &pos);
      if (pos != tok.size() || !std::isfinite(v)) throw std::invalid_argument(what);
      return v;
    } catch (const std::logic_error&) {
      throw ParseError(std::string("bad ") + what + " '" + tok + "'", line_);
    }
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace detail

/// Throws ParseError (with the 1-based line number) on truncation, malformed
/// numbers, or bodies whose joint count differs from the first body's.
inline RawSequence parse_ntu_skeleton(std::istream& in) {
  detail::LineReader r(in);
  RawSequence seq;
  const std::size_t frames = r.count("frame count");
  std::optional<std::size_t> joint_count;
  seq.frames.resize(frames);
  for (auto& frame : seq.frames) {
    const std::size_t bodies = r.count("body count");
    for (std::size_t b = 0; b < bodies; ++b) {
      RawBody body;
      body.id = r.tokens("body info")[0];
      const std::size_t joints = r.count("joint count");
      if (joint_count && *joint_count != joints) {
        throw ParseError("inconsistent joint count " + std::to_string(joints) + ", earlier bodies have " +
                             std::to_string(*joint_count),
                         r.line());
      }
      joint_count = joints;
      body.joints.resize(joints);
      for (auto& j : body.joints) {
        auto t = r.tokens("joint record");
        if (t.size() < 3) throw ParseError("joint record needs at least 3 values", r.line());
        for (std::size_t c = 0; c < 3; ++c) j[c] = r.number(t[c], "coordinate");
      }
      frame.bodies.push_back(std::move(body));
    }
  }
  return seq;
}

struct PreprocessOptions {
  std::size_t frames = 64;
  std::size_t max_persons = 2;
  std::size_t origin_joint = 0;  // spine base in the 25-joint layout
};

/// Translation, person clipping and uniform temporal resampling.
/// Persons are body ids ranked by total joint-motion energy
/// sum_t ||x[t+1] - x[t]||^2 (ties by first appearance); the top
/// `max_persons` are kept in that order. All coordinates are shifted so the
/// origin joint of the top-ranked person in its first tracked frame sits at
/// 0. Frames where a person is untracked stay zero. Output frame t samples
/// input position t * T_in / T_out with linear interpolation.
inline SkeletonSample preprocess(const RawSequence& raw, std::vector<float> label, std::string id,
                                 const PreprocessOptions& opt = {}) {
  if (raw.frames.empty()) throw InputError("preprocess: sequence " + id + " has no frames");
  if (opt.frames == 0 || opt.max_persons == 0) throw ConfigError("preprocess: frames and max_persons must be >= 1");
  std::size_t V = 0;
  for (const auto& f : raw.frames)
    for (const auto& b : f.bodies) V = std::max(V, b.joints.size());
  if (V == 0) throw InputError("preprocess: sequence " + id + " has no joints");
  if (opt.origin_joint >= V) throw ConfigError("preprocess: origin joint out of range");

  const std::size_t T_in = raw.frames.size();
  struct Track {
    std::string id;
    std::size_t first_seen;
    std::vector<const RawBody*> frames;
    double energy = 0;
  };
  std::vector<Track> tracks;
  std::map<std::string, std::size_t> index;
  for (std::size_t t = 0; t < T_in; ++t)
    for (const auto& b : raw.frames[t].bodies) {
      auto [it, fresh] = index.emplace(b.id, tracks.size());
      if (fresh) tracks.push_back({b.id, t, std::vector<const RawBody*>(T_in, nullptr)});
      tracks[it->second].frames[t] = &b;
    }
  if (tracks.empty()) throw InputError("preprocess: sequence " + id + " has no bodies");
  for (auto& tr : tracks)
    for (std::size_t t = 0; t + 1 < T_in; ++t) {
      const auto *a = tr.frames[t], *b = tr.frames[t + 1];
      if (!a || !b) continue;
      for (std::size_t j = 0; j < a->joints.size(); ++j)
        for (std::size_t c = 0; c < 3; ++c) {
          const double d = double(b->joints[j][c]) - double(a->joints[j][c]);
          tr.energy += d * d;
        }
    }
  std::stable_sort(tracks.begin(), tracks.end(), [](const Track& a, const Track& b) { return a.energy > b.energy; });
  const std::size_t M = std::min(opt.max_persons, tracks.size());

  const RawBody* anchor = tracks[0].frames[tracks[0].first_seen];
  const std::array<float, 3> origin = anchor->joints[opt.origin_joint];

  Tensor<float> full(Shape{M, 3, T_in, V});
  for (std::size_t p = 0; p < M; ++p)
    for (std::size_t t = 0; t < T_in; ++t) {
      const auto* body = tracks[p].frames[t];
      if (!body) continue;
      for (std::size_t v = 0; v < body->joints.size(); ++v)
        for (std::size_t c = 0; c < 3; ++c) full(p, c, t, v) = body->joints[v][c] - origin[c];
    }

  SkeletonSample out{std::move(id), std::move(label), Tensor<float>(Shape{M, 3, opt.frames, V})};
  for (std::size_t t = 0; t < opt.frames; ++t) {
    const double src = double(t) * double(T_in) / double(opt.frames);
    const std::size_t lo = std::min(std::size_t(src), T_in - 1);
    const std::size_t hi = std::min(lo + 1, T_in - 1);
    const double w = src - double(lo);
    for (std::size_t p = 0; p < M; ++p)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t v = 0; v < V; ++v) {
          const double a = full(p, c, lo, v);
          out.joints(p, c, t, v) = w == 0.0 ? float(a) : float(a + w * (double(full(p, c, hi, v)) - a));
        }
  }
  return out;
}

/// Action class (0-based) from an NTU file name such as
/// S001C002P003R002A013.skeleton; nullopt when the pattern is absent.
inline std::optional<std::size_t> ntu_action_from_name(const std::string& name) {
  static const std::regex pattern(R"(A(\d{3}))");
  std::smatch m;
  if (!std::regex_search(name, m, pattern)) return std::nullopt;
  const int a = std::stoi(m[1]);
  if (a < 1) return std::nullopt;
  return std::size_t(a - 1);
}

}  // namespace tacnn
