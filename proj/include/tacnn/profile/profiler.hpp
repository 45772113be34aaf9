#pragma once

#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tacnn/model/config.hpp"
#include "tacnn/nn/conv2d.hpp"
#include "tacnn/nn/squeeze_excite.hpp"

namespace tacnn {

struct ProfileRow {
  std::string module;
  std::string layer;
  std::vector<std::size_t> input;   // per person, (C, H, W)
  std::vector<std::size_t> output;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;

  friend bool operator==(const ProfileRow&, const ProfileRow&) = default;
};

/// Per-layer accounting in the layout of the reference architecture table.
/// 1 MAC is reported as 1 FLOP; values are rounded half away from zero.
struct ProfileReport {
  std::vector<ProfileRow> rows;
  std::size_t persons = 1;

  std::uint64_t total_params() const {
    std::uint64_t n = 0;
    for (const auto& r : rows) n += r.params;
    return n;
  }
  std::uint64_t total_macs() const {
    std::uint64_t n = 0;
    for (const auto& r : rows) n += r.macs;
    return n;
  }
  const ProfileRow& row(const std::string& module, const std::string& layer) const {
    for (const auto& r : rows)
      if (r.module == module && r.layer == layer) return r;
    throw InputError("profile has no row " + module + " / " + layer);
  }
};

/// n / unit rounded half away from zero to 3 decimals, as text.
inline std::string scaled3(std::uint64_t n, std::uint64_t unit) {
  const std::uint64_t step = unit / 1000;
  const std::uint64_t q = (n + step / 2) / step;
  std::ostringstream s;
  s << q / 1000 << '.' << std::setw(3) << std::setfill('0') << q % 1000;
  return s.str();
}

inline std::string params_m(std::uint64_t n) { return scaled3(n, 1'000'000); }
inline std::string gflops(std::uint64_t macs) { return scaled3(macs, 1'000'000'000); }

/// The 3-decimal value as a double, for tolerance checks.
inline double rounded3(std::uint64_t n, std::uint64_t unit) { return std::stod(scaled3(n, unit)); }

inline std::string shape_text(const std::vector<std::size_t>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

/// Parameters and MACs for `persons` persons per sample. Rows before maxout
/// scale with persons; CAG/VAG rows cover both streams.
inline ProfileReport profile(const ModelConfig& config, std::size_t persons = 1) {
  config.validate();
  if (persons < 1) throw ConfigError("profile: persons must be >= 1");
  using C = ModelConfig;
  const std::size_t T = config.frames, V = config.joints, M = persons;
  const std::uint64_t streams = 2;
  ProfileReport rep;
  rep.persons = persons;
  auto conv_row = [&](std::string module, std::string layer, const Conv2dSpec& s, std::size_t h, std::size_t w,
                      std::uint64_t copies, std::uint64_t extra_params = 0) {
    rep.rows.push_back({std::move(module), std::move(layer), {s.in_channels, h, w}, {s.out_channels, s.out_h(h), s.out_w(w)},
                        copies * (s.param_count() + extra_params), copies * M * s.macs(h, w)});
  };
  auto se_row = [&](std::string module, std::size_t channels, std::size_t h, std::size_t w) {
    const SqueezeExciteSpec s{channels, 1};
    rep.rows.push_back({std::move(module), "SE,r=1", {channels, h, w}, {channels, h, w}, streams * s.param_count(),
                        streams * M * s.macs()});
  };
  const auto n_cag = std::to_string(config.n_cag), n_vag = std::to_string(config.n_vag);

  const std::string cag = "CAG*2";
  conv_row(cag, "conv1x1,64,BN,ReLU", Conv2dSpec::pointwise(config.coords, C::cag_hidden), T, V, streams,
           2 * C::cag_hidden);
  conv_row(cag, "conv1x1,30", Conv2dSpec::pointwise(C::cag_hidden, C::grouped), T, V, streams);
  se_row(cag, C::grouped, T, V);
  conv_row(cag, "conv3x1,30,group " + n_cag, Conv2dSpec::same(C::grouped, C::grouped, 3, 1, config.n_cag), T, V,
           streams);
  conv_row(cag, "conv1x1,30,group " + std::to_string(config.n_cag / 2),
           Conv2dSpec::pointwise(C::grouped, C::grouped, config.n_cag / 2), T, V, streams);
  conv_row(cag, "conv1x1,32", Conv2dSpec::pointwise(C::grouped, C::block_out), T, V, streams);

  rep.rows.push_back({"Transpose", "transpose(3,2,1)", {C::block_out, T, V}, {V, T, C::block_out}, 0, 0});

  const std::string vag = "VAG*2";
  const std::size_t W = C::block_out;
  conv_row(vag, "conv1x1,30", Conv2dSpec::pointwise(V, C::grouped), T, W, streams);
  se_row(vag, C::grouped, T, W);
  conv_row(vag, "conv3x3,30,group " + n_vag, Conv2dSpec::same(C::grouped, C::grouped, 3, 3, config.n_vag), T, W,
           streams);
  conv_row(vag, "conv1x1,30,group " + std::to_string(config.n_vag / 2),
           Conv2dSpec::pointwise(C::grouped, C::grouped, config.n_vag / 2), T, W, streams);
  conv_row(vag, "conv1x1,32", Conv2dSpec::pointwise(C::grouped, C::block_out), T, W, streams);
  conv_row(vag, "Maxpool,conv3x3,64,Maxpool", Conv2dSpec::same(C::block_out, C::vag_tail, 3, 3), T / 2, W / 2,
           streams);
  auto& tail = rep.rows.back();
  tail.input = {C::block_out, T, W};
  tail.output = {C::vag_tail, T / 4, W / 4};

  rep.rows.push_back({"Concat", "concat(1),Dropout(0.5)", {C::vag_tail, T / 4, W / 4}, {2 * C::vag_tail, T / 4, W / 4},
                      0, 0});
  conv_row("Convs", "conv3x3,128,Maxpool,ReLU,Dropout(0.5)", Conv2dSpec::same(2 * C::vag_tail, C::fused, 3, 3), T / 4,
           W / 4, 1);
  rep.rows.back().output = {C::fused, T / 8, W / 8};
  conv_row("Convs", "conv3x3,256,Maxpool,ReLU", Conv2dSpec::same(C::fused, C::head, 3, 3), T / 8, W / 8, 1);
  rep.rows.back().output = {C::head, T / 16, W / 16};
  rep.rows.push_back({"Mean", "mean(2)", {C::head, T / 16, W / 16}, {C::head, 1, W / 16}, 0, 0});
  rep.rows.push_back({"Maxout", "maxout", {C::head, 1, W / 16, M}, {C::head, 1, W / 16}, 0, 0});
  rep.rows.push_back({"FC", "Flatten,Dropout(0.5)," + std::to_string(C::feature_size) + "xclasses fc",
                      {C::head, 1, W / 16}, {config.classes},
                      std::uint64_t(C::feature_size) * config.classes + config.classes,
                      std::uint64_t(C::feature_size) * config.classes});
  return rep;
}

/// Parameter rows only (MAC column zero).
inline ProfileReport count_params(const ModelConfig& config) {
  auto rep = profile(config, 1);
  for (auto& r : rep.rows) r.macs = 0;
  return rep;
}

inline ProfileReport count_macs(const ModelConfig& config, std::size_t persons) { return profile(config, persons); }

enum class ReportFormat { text, csv };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "text") return ReportFormat::text;
  if (s == "csv") return ReportFormat::csv;
  throw UsageError("unknown report format '" + s + "' (expected text or csv)");
}

inline constexpr const char* kProfileCsvHeader = "module,layer,input,output,params,params_m,macs,gflops";

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') out.back() += '"', ++i;
      else if (c == '"') quoted = false;
      else out.back() += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace detail

/// CSV: header plus one line per row. Text: aligned columns with a total
/// line (omitted for an empty report).
inline void render_report(std::ostream& out, const ProfileReport& rep, ReportFormat format) {
  if (format == ReportFormat::csv) {
    out << kProfileCsvHeader << '\n';
    for (const auto& r : rep.rows) {
      out << detail::csv_field(r.module) << ',' << detail::csv_field(r.layer) << ',' << shape_text(r.input) << ','
          << shape_text(r.output) << ',' << r.params << ',' << params_m(r.params) << ',' << r.macs << ','
          << gflops(r.macs) << '\n';
    }
    return;
  }
  const std::vector<std::string> head = {"Module", "Layer", "Input", "Output", "Params", "Param.(M)", "MACs", "GFLOPs"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rep.rows) {
    cells.push_back({r.module, r.layer, shape_text(r.input), shape_text(r.output), std::to_string(r.params),
                     params_m(r.params), std::to_string(r.macs), gflops(r.macs)});
  }
  if (!rep.rows.empty()) {
    cells.push_back({"Total", "persons=" + std::to_string(rep.persons), "", "", std::to_string(rep.total_params()),
                     params_m(rep.total_params()), std::to_string(rep.total_macs()), gflops(rep.total_macs())});
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool numeric = c >= 4;
      out << (c ? "  " : "") << (numeric ? std::right : std::left) << std::setw(int(width[c])) << row[c];
    }
    out << '\n';
  };
  line(head);
  if (cells.empty()) return;
  std::size_t total_width = 2 * (head.size() - 1);
  for (auto w : width) total_width += w;
  out << std::string(total_width, '-') << '\n';
  for (std::size_t i = 0; i + 1 < cells.size(); ++i) line(cells[i]);
  out << std::string(total_width, '-') << '\n';
  line(cells.back());
}

inline std::string render_report(const ProfileReport& rep, ReportFormat format) {
  std::ostringstream s;
  render_report(s, rep, format);
  return s.str();
}

/// Rows back from render_report(..., csv); throws ParseError on malformed
/// lines. `persons` is not part of the CSV and stays 1.
inline ProfileReport parse_report_csv(std::istream& in) {
  ProfileReport rep;
  std::string line;
  std::size_t n = 0;
  auto shape = [&](const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    for (std::string part; std::getline(ss, part, 'x');) out.push_back(std::stoull(part));
    return out;
  };
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != kProfileCsvHeader) throw ParseError("unexpected profile CSV header", n);
      continue;
    }
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 8) throw ParseError("expected 8 fields, got " + std::to_string(f.size()), n);
    try {
      rep.rows.push_back({f[0], f[1], shape(f[2]), shape(f[3]), std::stoull(f[4]), std::stoull(f[6])});
    } catch (const std::logic_error&) {
      throw ParseError("malformed number", n);
    }
  }
  return rep;
}

}  // namespace tacnn
