#pragma once

#include <algorithm>
#include <functional>
#include <iomanip>
#include <ostream>
#include <vector>

#include "tacnn/model/ta_cnn.hpp"

namespace tacnn {

struct ClassAccuracy {
  std::size_t cls = 0;
  std::size_t count = 0;
  std::size_t correct = 0;

  double accuracy() const { return count ? double(correct) / double(count) : 0.0; }
};

struct EvalResult {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::vector<ClassAccuracy> per_class;  // one entry per class, including empty ones

  double accuracy() const { return total ? double(correct) / double(total) : 0.0; }
};

/// Scores one sample's logits; argmax of logits against argmax of label,
/// first index on ties.
using Predictor = std::function<std::vector<float>(const SkeletonSample&)>;

inline std::size_t argmax(std::span<const float> v) {
  return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

inline void score(EvalResult& r, std::size_t predicted, std::size_t truth) {
  if (truth >= r.per_class.size()) throw InputError("label class " + std::to_string(truth) + " out of range");
  ++r.total;
  ++r.per_class[truth].count;
  if (predicted == truth) {
    ++r.correct;
    ++r.per_class[truth].correct;
  }
}

inline EvalResult make_eval_result(std::size_t classes) {
  EvalResult r;
  for (std::size_t k = 0; k < classes; ++k) r.per_class.push_back({k, 0, 0});
  return r;
}

inline EvalResult evaluate(const Dataset& data, const Predictor& predict) {
  if (data.empty()) throw InputError("evaluate: empty split");
  auto r = make_eval_result(data.front().classes());
  for (const auto& s : data) {
    const auto z = predict(s);
    score(r, argmax(z), s.label_class());
  }
  return r;
}

/// Eval-mode top-1 accuracy, batching `batch` samples per forward pass.
inline EvalResult evaluate(TaCnn<float>& model, const Dataset& data, std::size_t batch = 64) {
  if (data.empty()) throw InputError("evaluate: empty split");
  const std::size_t K = model.config().classes;
  auto r = make_eval_result(K);
  for (std::size_t start = 0; start < data.size(); start += batch) {
    const std::size_t end = std::min(data.size(), start + batch);
    std::vector<const SkeletonSample*> chunk;
    for (std::size_t i = start; i < end; ++i) {
      if (data[i].classes() != K) {
        throw InputError("sample " + data[i].id + " has " + std::to_string(data[i].classes()) +
                         " classes, model has " + std::to_string(K));
      }
      chunk.push_back(&data[i]);
    }
    Tape<float> tape;
    tape.set_grad_enabled(false);
    const Var<float> logits = model.forward(tape, std::span<const SkeletonSample* const>(chunk), Mode::eval);
    const auto z = logits.value().data();
    for (std::size_t i = 0; i < chunk.size(); ++i) score(r, argmax(z.subspan(i * K, K)), chunk[i]->label_class());
  }
  return r;
}

/// class,count,correct,accuracy
inline void write_per_class_csv(std::ostream& out, const EvalResult& r) {
  out << "class,count,correct,accuracy\n";
  for (const auto& c : r.per_class) {
    out << c.cls << ',' << c.count << ',' << c.correct << ',' << std::fixed << std::setprecision(6) << c.accuracy()
        << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace tacnn
