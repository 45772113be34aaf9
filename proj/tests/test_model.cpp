#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "tacnn/core/gradcheck.hpp"
#include "tacnn/model/attention.hpp"
#include "tacnn/model/checkpoint.hpp"

namespace tacnn {
namespace {

ModelConfig tiny_config(std::size_t classes = 3) {
  ModelConfig c;
  c.frames = 16;
  c.joints = 5;
  c.classes = classes;
  c.seed = 7;
  return c;
}

SkeletonSample random_sample(const ModelConfig& c, std::size_t persons, std::size_t cls, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {"s" + std::to_string(seed), one_hot(cls, c.classes),
          Tensor<float>::uniform(Shape{persons, c.coords, c.frames, c.joints}, rng)};
}

TEST(MotionStream, ConstantInTimeIsZero) {
  Tensor<float> x(Shape{2, 3, 5, 4}, 1.5f);
  EXPECT_EQ(motion_stream(x), Tensor<float>(Shape{2, 3, 5, 4}));
}

TEST(MotionStream, LinearInTimeIsConstantExceptLastFrame) {
  Tensor<double> x(Shape{1, 3, 6, 2});
  const double u[3] = {0.5, -1.0, 2.0};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t v = 0; v < 2; ++v) x(0, c, t, v) = double(t) * u[c];
  auto m = motion_stream(x);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t v = 0; v < 2; ++v) {
      for (std::size_t t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(m(0, c, t, v), u[c]);
      EXPECT_EQ(m(0, c, 5, v), 0.0);
    }
}

TEST(MotionStream, MatchesFrameDifferenceLoop) {
  std::mt19937_64 rng(1);
  auto x = Tensor<float>::uniform(Shape{2, 3, 7, 5}, rng);
  auto m = motion_stream(x);
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t t = 0; t < 7; ++t)
        for (std::size_t v = 0; v < 5; ++v)
          EXPECT_EQ(m(p, c, t, v), t + 1 < 7 ? x(p, c, t + 1, v) - x(p, c, t, v) : 0.0f);
  EXPECT_THROW(motion_stream(Tensor<float>(Shape{1, 3, 1, 5})), InputError);
}

class ShapeChain : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ShapeChain, MatchesArchitectureTable) {
  const std::size_t persons = GetParam();
  TaCnn<float> model(ModelConfig{});
  Tape<float> tape;
  tape.set_grad_enabled(false);
  ShapeTrace tr;
  auto logits = model.forward(tape, Tensor<float>(Shape{persons, 3, 64, 25}), {persons}, Mode::eval, &tr);
  const std::size_t P = persons;
  for (const std::string s : {"skeleton", "motion"}) {
    EXPECT_EQ(tr.at(s + ".cag.input"), (Shape{P, 3, 64, 25}));
    EXPECT_EQ(tr.at(s + ".cag.map_in"), (Shape{P, 64, 64, 25}));
    EXPECT_EQ(tr.at(s + ".cag.map_mid"), (Shape{P, 30, 64, 25}));
    EXPECT_EQ(tr.at(s + ".cag.attention"), (Shape{P, 30, 64, 25}));
    EXPECT_EQ(tr.at(s + ".cag.dual"), (Shape{P, 30, 64, 25}));
    EXPECT_EQ(tr.at(s + ".cag.map_out"), (Shape{P, 32, 64, 25}));
    EXPECT_EQ(tr.at(s + ".transpose"), (Shape{P, 25, 64, 32}));
    EXPECT_EQ(tr.at(s + ".vag.map_in"), (Shape{P, 30, 64, 32}));
    EXPECT_EQ(tr.at(s + ".vag.attention"), (Shape{P, 30, 64, 32}));
    EXPECT_EQ(tr.at(s + ".vag.dual"), (Shape{P, 30, 64, 32}));
    EXPECT_EQ(tr.at(s + ".vag.map_out"), (Shape{P, 32, 64, 32}));
    EXPECT_EQ(tr.at(s + ".vag.tail"), (Shape{P, 64, 16, 8}));
  }
  EXPECT_EQ(tr.at("concat"), (Shape{P, 128, 16, 8}));
  EXPECT_EQ(tr.at("convs.fuse"), (Shape{P, 128, 8, 4}));
  EXPECT_EQ(tr.at("convs.head"), (Shape{P, 256, 4, 2}));
  EXPECT_EQ(tr.at("mean"), (Shape{P, 256, 1, 2}));
  EXPECT_EQ(tr.at("maxout"), (Shape{1, 256, 1, 2}));
  EXPECT_EQ(logits.dims(), (Shape{1, 60, 1, 1}));
}

INSTANTIATE_TEST_SUITE_P(Persons, ShapeChain, ::testing::Values(1u, 2u));

TEST(TaCnn, RejectsBadConfigAndInputs) {
  ModelConfig c;
  c.frames = 8;
  EXPECT_THROW(TaCnn<float>{c}, ConfigError);
  TaCnn<float> model(tiny_config());
  Tape<float> tape;
  EXPECT_THROW(model.forward(tape, Tensor<float>(Shape{1, 3, 16, 5}), {0}, Mode::eval), InputError);
  EXPECT_THROW(model.forward(tape, Tensor<float>(Shape{3, 3, 16, 5}), {3}, Mode::eval), InputError);
  EXPECT_THROW(model.forward(tape, Tensor<float>(Shape{1, 3, 16, 6}), {1}, Mode::eval), ShapeError);
}

TEST(TaCnn, EvalForwardIsBitwiseDeterministic) {
  const auto c = tiny_config();
  TaCnn<float> model(c);
  auto s = random_sample(c, 2, 0, 2);
  EXPECT_EQ(model.logits(s), model.logits(s));
}

TEST(TaCnn, SameSeedBuildsSameModel) {
  const auto c = tiny_config();
  TaCnn<float> a(c), b(c);
  auto s = random_sample(c, 1, 0, 3);
  EXPECT_EQ(a.logits(s), b.logits(s));
}

TEST(TaCnn, DuplicatedPersonGivesSameLogits) {
  const auto c = tiny_config();
  TaCnn<float> model(c);
  auto one = random_sample(c, 1, 0, 4);
  SkeletonSample two = one;
  std::vector<Tensor<float>> parts{one.joints, one.joints};
  two.joints = stack_batch<float>(parts);
  EXPECT_EQ(model.logits(one), model.logits(two));
}

TEST(TaCnn, TwoPersonsMatchMaxOfPerPersonFeatures) {
  const auto c = tiny_config();
  TaCnn<double> model(c);
  std::mt19937_64 rng(5);
  auto x = Tensor<double>::uniform(Shape{2, 3, 16, 5}, rng);

  Tape<double> tape;
  tape.set_grad_enabled(false);
  std::vector<Tensor<double>> feats;
  for (std::size_t p = 0; p < 2; ++p) {
    feats.push_back(model.forward_persons(tape, tape.constant(slice_batch(x, p, 1)), Mode::eval).value());
  }
  const auto& w = model.fc().weight().value;
  const auto& b = model.fc().bias().value;
  const std::size_t F = ModelConfig::feature_size;
  std::vector<double> expected(c.classes);
  for (std::size_t k = 0; k < c.classes; ++k) {
    double acc = b[k];
    for (std::size_t f = 0; f < F; ++f) acc += w[k * F + f] * std::max(feats[0][f], feats[1][f]);
    expected[k] = acc;
  }
  auto got = model.forward(tape, x, {2}, Mode::eval).value();
  for (std::size_t k = 0; k < c.classes; ++k) EXPECT_NEAR(got[k], expected[k], 1e-12);
}

TEST(TaCnn, BatchOfSamplesMatchesIndividualForwards) {
  const auto c = tiny_config();
  TaCnn<float> model(c);
  auto a = random_sample(c, 2, 0, 6), b = random_sample(c, 1, 1, 7);
  const SkeletonSample* batch[] = {&a, &b};
  Tape<float> tape;
  tape.set_grad_enabled(false);
  auto logits = model.forward(tape, std::span<const SkeletonSample* const>(batch), Mode::eval).value();
  const auto la = model.logits(a), lb = model.logits(b);
  for (std::size_t k = 0; k < c.classes; ++k) {
    EXPECT_NEAR(logits(0, k, 0, 0), la[k], 1e-5);
    EXPECT_NEAR(logits(1, k, 0, 0), lb[k], 1e-5);
  }
}

TEST(TaCnn, ParameterCountMatchesAllocation) {
  TaCnn<float> model(ModelConfig{});
  std::size_t n = 0;
  for (auto* p : model.parameters()) n += p->value.size();
  EXPECT_EQ(model.parameter_count(), n);
  EXPECT_EQ(n, 532600u);
  ModelConfig ten;
  ten.n_vag = 10;
  EXPECT_EQ(TaCnn<float>(ten).parameter_count(), 532600u - (2760 - 1680) - (660 - 420));
}

TEST(TaCnn, EndToEndGradientsMatchFiniteDifferences) {
  auto c = tiny_config();
  c.dropout = 0.0;
  TaCnn<double> model(c);
  std::mt19937_64 rng(8);
  auto x = Tensor<double>::uniform(Shape{3, 3, 16, 5}, rng);
  const std::vector<std::size_t> counts{2, 1};
  Tensor<double> target(Shape{2, 3, 1, 1});
  target(0, 1, 0, 0) = 1.0;
  target(1, 0, 0, 0) = 0.6;
  target(1, 2, 0, 0) = 0.4;
  auto loss = [&](Tape<double>& tape, const Var<double>& in) {
    return softmax_cross_entropy(model.forward_from(tape, in, counts, Mode::train), target);
  };
  EXPECT_LT(finite_diff_check<double>(loss, x), 1e-4);

  LossBuilder<double> builder = [&](Tape<double>& tape) { return loss(tape, tape.constant(x)); };
  GradCheckOptions opt;
  opt.max_coords_per_tensor = 6;
  opt.seed = 9;
  EXPECT_LT(gradient_check<double>(builder, model.parameters(), opt), 1e-4);
}

TEST(Ensemble, SingleModelIsItsOwnSoftmax) {
  const auto c = tiny_config();
  TaCnn<float> model(c);
  auto s = random_sample(c, 1, 0, 10);
  TaCnn<float>* models[] = {&model};
  EXPECT_EQ(ensemble_predict<float>(models, s), model.probabilities(s));
}

TEST(Ensemble, IdenticalModelsEqualEither) {
  const auto c = tiny_config();
  TaCnn<float> a(c), b(c);
  auto s = random_sample(c, 2, 1, 11);
  TaCnn<float>* models[] = {&a, &b};
  const auto p = ensemble_predict<float>(models, s);
  const auto q = a.probabilities(s);
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_FLOAT_EQ(p[k], q[k]);
}

TEST(Ensemble, AveragesKnownDistributions) {
  // softmax(0, ln 3) = (1/4, 3/4); softmax(0, 0) = (1/2, 1/2)
  const auto p = average_probabilities<double>({{0.0, std::log(3.0)}, {0.0, 0.0}});
  EXPECT_NEAR(p[0], 0.375, 1e-15);
  EXPECT_NEAR(p[1], 0.625, 1e-15);
}

TEST(Ensemble, MismatchedClassesIsConfigError) {
  auto c = tiny_config(3);
  TaCnn<float> a(c), b(tiny_config(4));
  TaCnn<float>* models[] = {&a, &b};
  EXPECT_THROW(ensemble_predict<float>(models, random_sample(c, 1, 0, 12)), ConfigError);
  EXPECT_THROW(average_probabilities<double>({{0.0}, {0.0, 1.0}}), ConfigError);
}

TEST(Checkpoint, RoundTripPreservesLogitsBitwise) {
  const auto c = tiny_config();
  TaCnn<float> model(c);
  // Move the running statistics away from their defaults first.
  {
    Tape<float> tape;
    auto s = random_sample(c, 2, 0, 13);
    model.forward(tape, s.joints, {2}, Mode::train);
  }
  std::stringstream buf;
  write_checkpoint(buf, make_checkpoint(model, 42));
  const auto ck = read_checkpoint(buf);
  EXPECT_EQ(ck.step, 42u);
  TaCnn<float> restored(ck.config);
  restore(restored, ck);
  const auto original = make_checkpoint(model, 0);
  ASSERT_EQ(original.tensors.size(), ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    const auto& a = original.tensors[i];
    EXPECT_EQ(a.name, ck.tensors[i].name);
    EXPECT_EQ(a.value, ck.tensors[i].value);
  }
  auto s = random_sample(c, 2, 1, 14);
  EXPECT_EQ(model.logits(s), restored.logits(s));
}

TEST(Checkpoint, CorruptStreamsAreFormatErrors) {
  TaCnn<float> model(tiny_config());
  std::stringstream buf;
  write_checkpoint(buf, make_checkpoint(model, 0));
  const std::string bytes = buf.str();

  std::stringstream bad_magic("TACX" + bytes.substr(4));
  EXPECT_THROW(read_checkpoint(bad_magic), FormatError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint(truncated), FormatError);
  std::string wrong_version = bytes;
  wrong_version[4] = 9;
  std::stringstream versioned(wrong_version);
  EXPECT_THROW(read_checkpoint(versioned), FormatError);

  std::stringstream ok(bytes);
  auto ck = read_checkpoint(ok);
  TaCnn<float> other(tiny_config(4));
  EXPECT_THROW(restore(other, ck), FormatError);
}

TEST(Attention, SingleSampleGatesAreThatSamplesGates) {
  const auto c = tiny_config();
  TaCnn<float> model(c);
  auto s = random_sample(c, 1, 2, 15);
  const auto rows = export_attention(model, {s});
  ASSERT_EQ(rows.size(), 60u);

  Tape<float> tape;
  AttentionGates<float> gates;
  model.forward(tape, s.joints, {1}, Mode::eval, nullptr, &gates);
  for (const auto& r : rows) {
    const auto& g = r.block == "cag" ? gates.cag->value() : gates.vag->value();
    EXPECT_EQ(r.cls, 2u);
    EXPECT_DOUBLE_EQ(r.mean_gate, double(g(0, r.channel, 0, 0)));
    EXPECT_GT(r.mean_gate, 0.0);
    EXPECT_LT(r.mean_gate, 1.0);
  }
}

TEST(Attention, PerClassMeansMatchManualAccumulation) {
  const auto c = tiny_config(2);
  TaCnn<float> model(c);
  Dataset data{random_sample(c, 1, 0, 16), random_sample(c, 2, 1, 17), random_sample(c, 1, 0, 18)};
  const auto rows = export_attention(model, data);

  auto sample_gate = [&](const SkeletonSample& s, bool cag, std::size_t ch) {
    Tape<float> tape;
    AttentionGates<float> gates;
    model.forward(tape, s.joints, {s.persons()}, Mode::eval, nullptr, &gates);
    const auto& g = cag ? gates.cag->value() : gates.vag->value();
    double m = 0;
    for (std::size_t p = 0; p < s.persons(); ++p) m += g(p, ch, 0, 0);
    return m / double(s.persons());
  };
  for (const auto& r : rows) {
    const bool cag = r.block == "cag";
    const double expected = r.cls == 0 ? (sample_gate(data[0], cag, r.channel) + sample_gate(data[2], cag, r.channel)) / 2
                                       : sample_gate(data[1], cag, r.channel);
    EXPECT_NEAR(r.mean_gate, expected, 1e-12);
  }
  std::ostringstream csv;
  write_attention_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, 30), "block,channel,class,mean_gate\n");
  EXPECT_THROW(export_attention(model, {}), InputError);
}

}  // namespace
}  // namespace tacnn
