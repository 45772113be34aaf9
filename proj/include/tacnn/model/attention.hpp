#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "tacnn/model/ta_cnn.hpp"

namespace tacnn {

struct AttentionRow {
  std::string block;  // "cag" or "vag"
  std::size_t channel = 0;
  std::size_t cls = 0;
  double mean_gate = 0;
};

/// Per-class mean of the skeleton-stream SE gates. A sample's gate is the
/// mean over its persons; classes come from the label argmax. Rows are
/// ordered by block, class, channel.
inline std::vector<AttentionRow> export_attention(TaCnn<float>& model, const Dataset& data) {
  if (data.empty()) throw InputError("export_attention: empty dataset");
  if (!model.config().attention) throw ConfigError("export_attention: model was built without attention");
  // class -> (sum of cag gates, sum of vag gates, sample count)
  struct Acc {
    std::vector<double> cag, vag;
    std::size_t count = 0;
  };
  std::map<std::size_t, Acc> per_class;
  for (const auto& s : data) {
    Tape<float> tape;
    tape.set_grad_enabled(false);
    AttentionGates<float> gates;
    model.forward(tape, s.joints, {s.persons()}, Mode::eval, nullptr, &gates);
    auto& acc = per_class[s.label_class()];
    auto add = [&](std::vector<double>& into, const Tensor<float>& g) {
      const std::size_t P = g.dim(0), C = g.dim(1);
      into.resize(C, 0.0);
      for (std::size_t c = 0; c < C; ++c) {
        double m = 0;
        for (std::size_t p = 0; p < P; ++p) m += g(p, c, 0, 0);
        into[c] += m / double(P);
      }
    };
    add(acc.cag, gates.cag->value());
    add(acc.vag, gates.vag->value());
    ++acc.count;
  }
  std::vector<AttentionRow> rows;
  for (const char* block : {"cag", "vag"}) {
    for (const auto& [cls, acc] : per_class) {
      const auto& sums = std::string(block) == "cag" ? acc.cag : acc.vag;
      for (std::size_t c = 0; c < sums.size(); ++c) rows.push_back({block, c, cls, sums[c] / double(acc.count)});
    }
  }
  return rows;
}

inline void write_attention_csv(std::ostream& out, const std::vector<AttentionRow>& rows) {
  out << "block,channel,class,mean_gate\n";
  out.precision(9);
  for (const auto& r : rows) out << r.block << ',' << r.channel << ',' << r.cls << ',' << r.mean_gate << '\n';
}

}  // namespace tacnn
