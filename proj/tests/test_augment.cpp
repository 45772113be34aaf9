#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>

#include "tacnn/augment/mix.hpp"

namespace tacnn {
namespace {

SkeletonSample sample(std::size_t persons, std::size_t cls, std::uint64_t seed, std::size_t V = 25,
                      std::size_t K = 4) {
  std::mt19937_64 rng(seed);
  return {"s" + std::to_string(seed), one_hot(cls, K), Tensor<float>::uniform(Shape{persons, 3, 6, V}, rng)};
}

TEST(BodyPartition, DefaultsCoverEveryJointOnce) {
  for (std::size_t V : {25u, 20u, 15u, 7u, 2u}) {
    auto p = BodyPartition::default_for(V);
    EXPECT_NO_THROW(p.validate(V));
    EXPECT_EQ(p.joints(), V);
  }
  auto ntu = BodyPartition::default_for(25);
  EXPECT_EQ(ntu.lower, (std::vector<std::size_t>{0, 12, 13, 14, 15, 16, 17, 18, 19}));
  EXPECT_EQ(ntu.upper.size(), 16u);
}

TEST(BodyPartition, InvalidPartitionsAreConfigErrors) {
  EXPECT_THROW((BodyPartition{{0, 1}, {1, 2}}.validate(3)), ConfigError);
  EXPECT_THROW((BodyPartition{{0}, {1}}.validate(3)), ConfigError);
  EXPECT_THROW((BodyPartition{{}, {0, 1}}.validate(2)), ConfigError);
  EXPECT_THROW((BodyPartition{{0, 5}, {1}}.validate(3)), ConfigError);
  EXPECT_THROW(BodyPartition::default_for(1), ConfigError);
}

TEST(SkeletonMix, SelfMixIsIdentity) {
  auto a = sample(2, 1, 1);
  auto m = skeleton_mix(a, a, BodyPartition::default_for(25), 0.6);
  EXPECT_EQ(m.joints, a.joints);
  EXPECT_EQ(m.label, a.label);
}

TEST(SkeletonMix, LambdaOneKeepsLabelButMixesJoints) {
  auto a = sample(1, 0, 2), b = sample(1, 3, 3);
  const auto part = BodyPartition::default_for(25);
  auto m = skeleton_mix(a, b, part, 1.0);
  EXPECT_EQ(m.label, a.label);
  EXPECT_EQ(m.joints(0, 0, 0, 12), b.joints(0, 0, 0, 12));
  EXPECT_NE(m.joints, a.joints);
}

TEST(SkeletonMix, RowsComeFromTheRightSourceBitwise) {
  auto a = sample(2, 0, 4), b = sample(2, 2, 5);
  const auto part = BodyPartition::default_for(25);
  auto m = skeleton_mix(a, b, part, 0.6);
  const std::set<std::size_t> lower(part.lower.begin(), part.lower.end());
  const auto& d = m.joints.dims();
  for (std::size_t p = 0; p < d[0]; ++p)
    for (std::size_t c = 0; c < d[1]; ++c)
      for (std::size_t t = 0; t < d[2]; ++t)
        for (std::size_t v = 0; v < d[3]; ++v) {
          const auto& src = lower.count(v) ? b : a;
          EXPECT_EQ(m.joints(p, c, t, v), src.joints(p, c, t, v));
        }
  EXPECT_EQ(m.label, (std::vector<float>{0.6f, 0.0f, 0.4f, 0.0f}));
  float total = 0;
  for (float y : m.label) total += y;
  EXPECT_NEAR(total, 1.0f, 1e-6f);
}

TEST(SkeletonMix, ShapeMismatchAndBadPartition) {
  auto a = sample(1, 0, 6), b = sample(2, 0, 7);
  EXPECT_THROW(skeleton_mix(a, b, BodyPartition::default_for(25), 0.6), InputError);
  EXPECT_THROW(skeleton_mix(a, a, BodyPartition{{0, 1}, {1}}, 0.6), ConfigError);
}

TEST(Mixup, EndpointsAndSymmetry) {
  auto a = sample(1, 0, 8), b = sample(1, 1, 9);
  auto one = vanilla_mixup(a, b, 1.0);
  EXPECT_EQ(one.joints, a.joints);
  EXPECT_EQ(one.label, a.label);

  SkeletonSample neg = a;
  for (auto& v : neg.joints.data()) v = -v;
  auto zero = vanilla_mixup(a, neg, 0.5);
  for (float v : zero.joints.data()) EXPECT_EQ(v, 0.0f);

  auto ab = vanilla_mixup(a, b, 0.3), ba = vanilla_mixup(b, a, 0.7);
  for (std::size_t i = 0; i < ab.joints.size(); ++i) EXPECT_NEAR(ab.joints[i], ba.joints[i], 1e-6f);
  for (std::size_t k = 0; k < ab.label.size(); ++k) EXPECT_NEAR(ab.label[k], ba.label[k], 1e-6f);
}

TEST(Mixup, MatchesElementwiseBlend) {
  auto a = sample(2, 0, 10), b = sample(2, 3, 11);
  auto m = vanilla_mixup(a, b, 0.25);
  for (std::size_t i = 0; i < m.joints.size(); ++i) {
    EXPECT_NEAR(m.joints[i], 0.25 * double(a.joints[i]) + 0.75 * double(b.joints[i]), 1e-7);
  }
}

std::vector<SkeletonSample> batch_of(std::size_t n) {
  std::vector<SkeletonSample> b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(sample(1 + i % 2, i % 4, 100 + i));
  return b;
}

std::size_t count_changed(const std::vector<SkeletonSample>& a, const std::vector<SkeletonSample>& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += !(a[i].joints == b[i].joints && a[i].label == b[i].label);
  return n;
}

TEST(BatchMix, AlphaZeroIsNoOp) {
  auto batch = batch_of(8);
  const auto before = batch;
  std::mt19937_64 rng(1);
  MixPolicy policy;
  policy.alpha = 0;
  EXPECT_TRUE(apply_batch_mix(batch, policy, BodyPartition::default_for(25), rng).empty());
  EXPECT_EQ(batch, before);
}

TEST(BatchMix, AlphaOneMixesBothOfTwo) {
  auto batch = batch_of(2);
  batch[1].joints = slice_batch(batch[1].joints, 0, 1);
  const auto before = batch;
  std::mt19937_64 rng(2);
  MixPolicy policy;
  policy.alpha = 1;
  auto mixed = apply_batch_mix(batch, policy, BodyPartition::default_for(25), rng);
  EXPECT_EQ(mixed, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(count_changed(before, batch), 2u);
}

TEST(BatchMix, SixtyFourAtOneSixteenthMixesFour) {
  auto batch = batch_of(64);
  const auto before = batch;
  std::mt19937_64 rng(3);
  auto mixed = apply_batch_mix(batch, MixPolicy{}, BodyPartition::default_for(25), rng);
  EXPECT_EQ(mixed.size(), 4u);
  EXPECT_EQ(count_changed(before, batch), 4u);
  for (auto i : mixed) {
    const auto& y = batch[i].label;
    EXPECT_GE(y[before[i].label_class()], 0.6f - 1e-6f);
    EXPECT_NEAR(std::accumulate(y.begin(), y.end(), 0.0f), 1.0f, 1e-6f);
    EXPECT_EQ(batch[i].persons(), before[i].persons());
  }
}

TEST(BatchMix, FixedSeedIsDeterministic) {
  auto a = batch_of(32), b = batch_of(32);
  std::mt19937_64 ra(4), rb(4);
  MixPolicy policy;
  policy.alpha = 0.25;
  auto ma = apply_batch_mix(a, policy, BodyPartition::default_for(25), ra);
  auto mb = apply_batch_mix(b, policy, BodyPartition::default_for(25), rb);
  EXPECT_EQ(ma, mb);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ma.size(), 8u);
}

TEST(BatchMix, TooSmallProductIsNoOp) {
  auto batch = batch_of(8);
  std::mt19937_64 rng(5);
  EXPECT_TRUE(apply_batch_mix(batch, MixPolicy{}, BodyPartition::default_for(25), rng).empty());
}

TEST(ScaleCoordinates, IdentityZeroAndSingleChannel) {
  auto x = sample(2, 0, 12);
  EXPECT_EQ(scale_coordinates(x, {1, 1, 1}).joints, x.joints);
  const auto zero = scale_coordinates(x, {0, 0, 0});
  for (float v : zero.joints.data()) EXPECT_EQ(v, 0.0f);
  auto half = scale_coordinates(x, {0.5f, 1, 1});
  const auto& d = x.joints.dims();
  for (std::size_t p = 0; p < d[0]; ++p)
    for (std::size_t c = 0; c < d[1]; ++c)
      for (std::size_t t = 0; t < d[2]; ++t)
        for (std::size_t v = 0; v < d[3]; ++v)
          EXPECT_EQ(half.joints(p, c, t, v), c == 0 ? x.joints(p, c, t, v) * 0.5f : x.joints(p, c, t, v));
  EXPECT_EQ(half.label, x.label);
}

TEST(ScaleCoordinates, OutOfRangeWarnsButApplies) {
  auto x = sample(1, 0, 13);
  std::vector<std::string> warnings;
  auto y = scale_coordinates(x, {2, 1, 1}, [&](const std::string& m) { warnings.push_back(m); });
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(y.joints(0, 0, 0, 0), 2 * x.joints(0, 0, 0, 0));
  EXPECT_THROW(scale_coordinates(x, {1, 1}), InputError);
}

}  // namespace
}  // namespace tacnn
