// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#include <gtest/gtest.h>

#include "scenes.hpp"

using namespace mpiview;
using namespace mpiview::testing;

namespace {

FeatureMap constant_map(int c, int h, int w, double v) {
  return {c, h, w, std::vector<double>(static_cast<std::size_t>(c) * h * w, v)};
}

::testing::AssertionResult rel_near(double actual, double expected, double rel = 1e-6) {
  const double tol = rel * std::max(1.0, std::abs(expected));
  if (std::abs(actual - expected) <= tol) return ::testing::AssertionSuccess();
  return ::testing::AssertionFailure() << actual << " vs " << expected;
}

}  // namespace

TEST(DepthLoss, Examples) {
  const DepthMap ref = smooth_depth(16, 12, PlaneDepthSchedule{}, 1);
  EXPECT_EQ(depth_loss(ref, ref), 0.0);
  std::vector<double> shifted(ref.values().begin(), ref.values().end());
  for (double& v : shifted) v += 0.1;
  EXPECT_TRUE(rel_near(depth_loss(ref, DepthMap(16, 12, shifted)), 0.1));
}

TEST(DepthLoss, RampWithDoubledGradients) {
  std::vector<double> r(16), p(16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      r[y * 4 + x] = 0.1 * x;
      p[y * 4 + x] = 0.2 * x;
    }
  // L1 0.15; gradient terms 0.1 at full scale and 0.2 at half scale.
  EXPECT_TRUE(rel_near(depth_loss(DepthMap(4, 4, r), DepthMap(4, 4, p)), 0.15 + 0.5 * (0.1 + 0.2)));
}

TEST(DepthLoss, MatchesIndependentImplementation) {
  const auto [a, b] = depth_pair();
  EXPECT_TRUE(rel_near(depth_loss(a, b), kDepthPair, 1e-12));
}

TEST(DepthLoss, SymmetricAndShapeChecked) {
  const PlaneDepthSchedule s;
  const DepthMap a = smooth_depth(20, 14, s, 1), b = smooth_depth(20, 14, s, 2);
  EXPECT_EQ(depth_loss(a, b), depth_loss(b, a));
  EXPECT_THROW(depth_loss(a, DepthMap(20, 15)), InputError);
}

TEST(DepthLoss, MaskRestrictsToValidPixels) {
  const DepthMap a(8, 8, 0.5);
  std::vector<double> bv(64, 0.5);
  bv[0] = 0.9;
  const DepthMap b(8, 8, bv);
  BinaryMask m(8, 8, true);
  m.set(0, 0, false);
  EXPECT_EQ(depth_loss(a, b, {}, &m), 0.0);
  EXPECT_GT(depth_loss(a, b), 0.0);
}

TEST(PixelLoss, Examples) {
  const Image img = textured_image(8, 6, 1);
  EXPECT_EQ(pixel_loss(img, img), 0.0);
  EXPECT_EQ(pixel_loss(Image(5, 4, 3, 0.0), Image(5, 4, 3, 1.0)), 1.0);
  EXPECT_EQ(pixel_loss(checkerboard(6, 6, false), checkerboard(6, 6, true)), 1.0);
  const Image other = noise_image(8, 6, 3);
  EXPECT_EQ(pixel_loss(img, other), pixel_loss(other, img));
  EXPECT_THROW(pixel_loss(img, Image(8, 6, 1)), InputError);
}

TEST(FeatureLoss, Examples) {
  const std::vector<FeatureMap> a{constant_map(2, 3, 3, 0.4), constant_map(4, 2, 2, 0.1)};
  EXPECT_EQ(feature_loss(a, a), 0.0);
  const std::vector<FeatureMap> z{constant_map(1, 2, 2, 0.0)}, o{constant_map(1, 2, 2, 1.0)};
  EXPECT_EQ(feature_loss(z, o), 1.0);
  const std::vector<FeatureMap> b{constant_map(2, 3, 3, 0.6), constant_map(4, 2, 2, 0.5)};
  EXPECT_TRUE(rel_near(feature_loss(a, b), 0.6));
  EXPECT_THROW(feature_loss(a, z), InputError);
}

TEST(Gram, Examples) {
  const auto g = gram_matrix(constant_map(1, 3, 5, 0.5));
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g[0], 0.25);
  for (double v : gram_matrix(constant_map(3, 2, 2, 0.0))) EXPECT_EQ(v, 0.0);
  // Two channels with disjoint support.
  const FeatureMap disjoint(2, 1, 4, {1, 1, 0, 0, 0, 0, 2, 2});
  const auto d = gram_matrix(disjoint);
  EXPECT_EQ(d[1], 0.0);
  EXPECT_EQ(d[2], 0.0);
  EXPECT_DOUBLE_EQ(d[0], 2.0 / 8.0);
  EXPECT_DOUBLE_EQ(d[3], 8.0 / 8.0);
  EXPECT_THROW(gram_matrix(FeatureMap{}), InputError);
}

TEST(Gram, SymmetricAndSpatiallyInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 1 + trial % 6, h = 3, w = 5;
    std::vector<double> v(static_cast<std::size_t>(c) * h * w);
    for (double& x : v) x = 2.0 * unit_uniform(rng) - 1.0;
    const FeatureMap f(c, h, w, v);
    const auto g = gram_matrix(f);
    for (int a = 0; a < c; ++a)
      for (int b = 0; b < c; ++b) ASSERT_EQ(g[a * c + b], g[b * c + a]);
    // Same permutation of positions in every channel.
    std::vector<std::size_t> perm(h * w);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pv(v.size());
    for (int ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < perm.size(); ++i) pv[ch * perm.size() + i] = v[ch * perm.size() + perm[i]];
    const auto gp = gram_matrix(FeatureMap(c, h, w, pv));
    for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(gp[i], g[i], 1e-6);
  }
}

TEST(StyleLoss, Examples) {
  const std::vector<FeatureMap> a{constant_map(1, 2, 3, 0.5)}, b{constant_map(1, 2, 3, 1.0)};
  EXPECT_EQ(style_loss(a, a), 0.0);
  EXPECT_DOUBLE_EQ(style_loss(a, b), 0.75);
  // Shuffling positions leaves style unchanged, permuting channels does not.
  const FeatureMap f(2, 1, 3, {0.1, 0.5, 0.9, 0.2, 0.2, 0.7});
  const FeatureMap shuffled(2, 1, 3, {0.9, 0.1, 0.5, 0.7, 0.2, 0.2});
  const FeatureMap swapped(2, 1, 3, {0.2, 0.2, 0.7, 0.1, 0.5, 0.9});
  EXPECT_NEAR(style_loss(std::vector{f}, std::vector{shuffled}), 0.0, 1e-15);
  EXPECT_GT(style_loss(std::vector{f}, std::vector{swapped}), 0.0);
}

TEST(TotalLoss, Examples) {
  EXPECT_EQ(total_loss({}).total, 0.0);
  const LossReport r = total_loss({1, 1, 1, 1, 0});
  EXPECT_TRUE(rel_near(r.total, 2.0101));
  EXPECT_EQ(r.depth, 1.0);
  EXPECT_EQ(r.style, 1.0);
  LossConfig no_style;
  no_style.gamma = 0.0;
  EXPECT_EQ(total_loss({0.2, 0.3, 0.4, 123.0, 0}, no_style).total, total_loss({0.2, 0.3, 0.4, 0.0, 0}, no_style).total);
  EXPECT_THROW(total_loss({-0.1, 0, 0, 0, 0}), InputError);
  EXPECT_THROW(total_loss({NAN, 0, 0, 0, 0}), NumericError);
}

TEST(TotalLoss, LinearInEachPart) {
  const LossConfig cfg;
  const LossReport base = total_loss({0.3, 0.2, 0.5, 7.0, 0}, cfg);
  EXPECT_TRUE(rel_near(total_loss({0.3, 0.2, 1.5, 7.0, 0}, cfg).total - base.total, cfg.beta * 1.0, 1e-9));
  EXPECT_TRUE(rel_near(total_loss({0.3, 0.2, 0.5, 9.0, 0}, cfg).total - base.total, cfg.gamma * 2.0, 1e-9));
}

TEST(Psnr, Examples) {
  const Image img = textured_image(10, 8, 2);
  EXPECT_EQ(psnr(img, img), 100.0);
  std::vector<double> v(img.values().begin(), img.values().end());
  for (double& x : v) x += 0.1;
  EXPECT_TRUE(rel_near(psnr(img, Image(10, 8, 3, v)), 20.0));
  EXPECT_EQ(psnr(Image(4, 4, 3, 0.0), Image(4, 4, 3, 1.0)), 0.0);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const Image img(16, 16, 3, 0.5);
  std::mt19937_64 rng(2);
  std::vector<double> noise(img.values().size());
  for (double& n : noise) n = 2.0 * unit_uniform(rng) - 1.0;
  double previous = 101.0;
  for (double amp : {0.001, 0.01, 0.05, 0.1, 0.2, 0.4}) {
    std::vector<double> v(noise.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 + amp * noise[i];
    const double p = psnr(img, Image(16, 16, 3, v));
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(Ssim, Examples) {
  const Image img = textured_image(24, 20, 3);
  EXPECT_TRUE(rel_near(ssim(img, img), 1.0));
  EXPECT_LT(ssim(checkerboard(16, 16, false), checkerboard(16, 16, true)), 0.0);
  const double c1 = 0.01 * 0.01;
  const double expected = (2 * 0.25 * 0.75 + c1) / (0.25 * 0.25 + 0.75 * 0.75 + c1);
  EXPECT_TRUE(rel_near(ssim(Image(12, 12, 1, 0.25), Image(12, 12, 1, 0.75)), expected));
  EXPECT_THROW(ssim(Image(10, 12, 1), Image(10, 12, 1)), InputError);
}

TEST(Ssim, MatchesReferenceImplementation) {
  EXPECT_TRUE(rel_near(ssim(wave_pair(false), wave_pair(true)), kSsimWaves, 1e-9));
  EXPECT_TRUE(rel_near(ssim(checkerboard(32, 24, false), checkerboard(32, 24, true)), kSsimChecker, 1e-9));
}

TEST(ToyFeatures, ThreeLevelsDeterministic) {
  const ToyFeatureExtractor fx;
  const Image img = textured_image(20, 16, 1);
  const auto a = fx(img), b = fx(img);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].channels, 8);
  EXPECT_EQ(a[1].width, 10);
  EXPECT_EQ(a[2].height, 4);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j].data, b[j].data);
  EXPECT_GT(feature_loss(a, fx(noise_image(20, 16, 2))), 0.0);
}
