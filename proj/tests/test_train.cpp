#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "tacnn/data/synth.hpp"
#include "tacnn/train/loop.hpp"

namespace tacnn {
namespace {

namespace fs = std::filesystem;

TEST(Schedule, MilestonesAndWarmup) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(lr_at(0, c), 0.001);
  EXPECT_NEAR(lr_at(649, c), 0.001, 1e-18);
  EXPECT_NEAR(lr_at(700, c), 1e-4, 1e-18);
  EXPECT_NEAR(lr_at(775, c), 1e-6, 1e-18);
  auto sbu = TrainConfig::for_profile("sbu");
  EXPECT_DOUBLE_EQ(lr_at(15, sbu), 0.0005);
  EXPECT_DOUBLE_EQ(lr_at(30, sbu), 0.001);
  EXPECT_EQ(sbu.batch_size, 8u);
  EXPECT_EQ(sbu.weight_decay, 2e-4);
  EXPECT_EQ(TrainConfig::for_profile("nucla").batch_size, 16u);
  EXPECT_THROW(TrainConfig::for_profile("kinetics"), ConfigError);
}

TEST(Schedule, PiecewiseConstantWithOneJumpPerMilestone) {
  TrainConfig c;
  std::size_t jumps = 0;
  for (std::size_t e = 1; e < c.epochs; ++e) jumps += lr_at(e, c) != lr_at(e - 1, c);
  EXPECT_EQ(jumps, c.milestones.size());
}

TEST(TrainConfigJson, ProfileThenOverridesAndValidation) {
  auto c = nlohmann::json::parse(R"({"profile": "sbu", "epochs": 100, "milestones": [50, 80]})").get<TrainConfig>();
  EXPECT_EQ(c.batch_size, 8u);
  EXPECT_EQ(c.epochs, 100u);
  EXPECT_NO_THROW(c.validate());
  nlohmann::json j = c;
  EXPECT_EQ(j.get<TrainConfig>(), c);
  EXPECT_THROW(nlohmann::json::parse(R"({"epoch": 3})").get<TrainConfig>(), ConfigError);
  c.milestones = {80, 50};
  EXPECT_THROW(c.validate(), ConfigError);
  c.milestones = {50, 100};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(nlohmann::json::parse(R"({"optimizer": {}})").get<RunConfig>(), ConfigError);
}

Parameter<float> scalar(float v) { return Parameter<float>("w", Tensor<float>(Shape{1, 1, 1, 1}, {v})); }

TEST(Adam, ZeroGradientNoDecayIsNoOp) {
  auto p = scalar(0.7f);
  AdamState<float> st;
  adam_step<float>({&p}, st, 0.001, 0.0);
  EXPECT_EQ(p.value[0], 0.7f);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter<double> p("w", Tensor<double>(Shape{1, 1, 1, 1}, {2.0}));
  p.grad[0] = 1.0;
  AdamState<double> st;
  adam_step<double>({&p}, st, 0.001, 0.0);
  EXPECT_NEAR(p.value[0], 2.0 - 0.001, 1e-10);
}

TEST(Adam, ThreeStepQuadraticMatchesRecurrence) {
  // f(x) = 1.5 x^2 with coupled decay 0.1: g = 3x + 0.1x
  Parameter<double> p("w", Tensor<double>(Shape{1, 1, 1, 1}, {1.0}));
  AdamState<double> st;
  long double x = 1.0L, m = 0, v = 0;
  const long double b1 = 0.9L, b2 = 0.999L, lr = 0.01L, eps = 1e-8L;
  for (int t = 1; t <= 3; ++t) {
    p.grad[0] = 3.0 * p.value[0];
    adam_step<double>({&p}, st, 0.01, 0.1);
    const long double g = 3.0L * x + 0.1L * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const long double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    EXPECT_NEAR(p.value[0], double(x), 1e-12) << t;
  }
  EXPECT_EQ(st.step, 3u);
}

TEST(Adam, NonFiniteGradientAbortsUntouched) {
  auto p = scalar(0.5f), q = scalar(1.5f);
  q.grad[0] = std::numeric_limits<float>::quiet_NaN();
  p.grad[0] = 1.0f;
  AdamState<float> st;
  EXPECT_THROW(adam_step<float>({&p, &q}, st, 0.1, 0.0), NumericError);
  EXPECT_EQ(p.value[0], 0.5f);
  EXPECT_EQ(st.step, 0u);
  AdamState<float> other;
  adam_step<float>({&p}, other, 0.1, 0.0);
  EXPECT_THROW(adam_step<float>({&p, &q}, other, 0.1, 0.0), ShapeError);
}

Dataset balanced(std::size_t n, std::size_t K) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i)
    d.push_back({"s" + std::to_string(i), one_hot(i % K, K), Tensor<float>(Shape{1, 3, 16, 5})});
  return d;
}

TEST(Evaluate, ConstantPredictorOnBalancedPairs) {
  auto r = evaluate(balanced(10, 2), [](const SkeletonSample&) { return std::vector<float>{1.0f, 0.0f}; });
  EXPECT_DOUBLE_EQ(r.accuracy(), 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[0].accuracy(), 1.0);
  EXPECT_DOUBLE_EQ(r.per_class[1].accuracy(), 0.0);
}

TEST(Evaluate, PerfectAndRandomStubs) {
  auto perfect = evaluate(balanced(12, 3), [](const SkeletonSample& s) { return s.label; });
  EXPECT_DOUBLE_EQ(perfect.accuracy(), 1.0);
  std::mt19937_64 rng(9);
  std::normal_distribution<float> n01;
  auto random = evaluate(balanced(5000, 5), [&](const SkeletonSample&) {
    std::vector<float> z(5);
    for (auto& v : z) v = n01(rng);
    return z;
  });
  EXPECT_NEAR(random.accuracy(), 0.2, 0.02);
  EXPECT_THROW(evaluate(Dataset{}, [](const SkeletonSample& s) { return s.label; }), InputError);
}

TEST(Evaluate, PerClassCsv) {
  auto r = evaluate(balanced(4, 2), [](const SkeletonSample&) { return std::vector<float>{0.0f, 1.0f}; });
  std::ostringstream out;
  write_per_class_csv(out, r);
  EXPECT_EQ(out.str(), "class,count,correct,accuracy\n0,2,0,0.000000\n1,2,2,1.000000\n");
}

ModelConfig tiny_model(std::uint64_t seed = 1) {
  ModelConfig c;
  c.frames = 16;
  c.joints = 5;
  c.classes = 4;
  c.seed = seed;
  return c;
}

TrainConfig tiny_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.milestones = {};
  t.batch_size = 8;
  t.seed = 3;
  t.mix.alpha = 0.125;
  return t;
}

TEST(TrainLoop, OneEpochOnTwoSamples) {
  SynthSpec spec;
  spec.classes = 4;
  spec.per_class = 1;
  auto data = synth_dataset(spec);
  data.resize(2);
  TaCnn<float> model(tiny_model());
  auto r = train_loop(model, data, tiny_train(1), BodyPartition::default_for(5));
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.history[0].loss));
  EXPECT_THROW(train_loop(model, Dataset{}, tiny_train(1), BodyPartition::default_for(5)), InputError);
}

TEST(TrainLoop, FixedSeedIsBitwiseReproducible) {
  SynthSpec spec;
  spec.per_class = 4;
  const auto data = synth_dataset(spec);
  const auto dir = fs::temp_directory_path() / "tacnn_test_train";
  fs::create_directories(dir);
  std::string logs[2], ckpts[2];
  for (int run = 0; run < 2; ++run) {
    TaCnn<float> model(tiny_model());
    std::ostringstream log;
    TrainHooks hooks;
    hooks.metrics = &log;
    hooks.validation = &data;
    hooks.checkpoint = dir / ("run" + std::to_string(run) + ".ckpt");
    train_loop(model, data, tiny_train(3), BodyPartition::default_for(5), hooks);
    logs[run] = log.str();
    std::ifstream in(*hooks.checkpoint, std::ios::binary);
    ckpts[run].assign(std::istreambuf_iterator<char>(in), {});
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_EQ(ckpts[0], ckpts[1]);
  std::istringstream lines(logs[0]);
  std::size_t n = 0;
  for (std::string line; std::getline(lines, line); ++n) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<std::size_t>(), n);
    for (const char* key : {"lr", "loss", "train_acc", "val_acc"}) EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(n, 3u);
  fs::remove_all(dir);
}

TEST(TrainLoop, LossDecreasesOnSmallSet) {
  SynthSpec spec;
  spec.per_class = 4;
  auto data = synth_dataset(spec);
  TaCnn<float> model(tiny_model(2));
  auto t = tiny_train(12);
  t.mix.alpha = 0;
  auto r = train_loop(model, data, t, BodyPartition::default_for(5));
  EXPECT_LT(r.history.back().loss, r.history.front().loss);
}

TEST(TrainLoop, DivergenceRestoresAndCheckpointsLastGoodState) {
  SynthSpec spec;
  spec.per_class = 2;
  auto data = synth_dataset(spec);
  TaCnn<float> model(tiny_model(4));
  auto t = tiny_train(5);
  t.lr = 1e30;
  const auto dir = fs::temp_directory_path() / "tacnn_test_diverge";
  fs::create_directories(dir);
  TrainHooks hooks;
  hooks.checkpoint = dir / "last.ckpt";
  std::vector<Checkpoint> starts;
  hooks.on_epoch = [&](const EpochMetrics&) { starts.push_back(make_checkpoint(model, starts.size() + 1)); };
  const auto initial = make_checkpoint(model, 0);
  EXPECT_THROW(train_loop(model, data, t, BodyPartition::default_for(5), hooks), NumericError);
  auto loaded = load_checkpoint(*hooks.checkpoint);
  const auto& expected = starts.empty() ? initial : starts.back();
  const auto got = make_checkpoint(*loaded.model, 0);
  ASSERT_EQ(got.tensors.size(), expected.tensors.size());
  for (std::size_t i = 0; i < got.tensors.size(); ++i) EXPECT_EQ(got.tensors[i].value, expected.tensors[i].value);
  EXPECT_EQ(loaded.step, starts.size());
  fs::remove_all(dir);
}

}  // namespace
}  // namespace tacnn
