// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#include <gtest/gtest.h>

#include "scenes.hpp"

using namespace mpiview;
using namespace mpiview::testing;

namespace {

BinaryMask single_pixel(int w, int h, int x, int y) {
  BinaryMask m(w, h);
  m.set(x, y, true);
  return m;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t i = 0; i < a.values().size(); ++i)
    if (a.values()[i] && !b.values()[i]) return false;
  return true;
}

}  // namespace

TEST(Morphology, Examples) {
  EXPECT_EQ(morph_filter(single_pixel(7, 7, 3, 3), {3, 1}).count(), 0u);
  const BinaryMask full(9, 9, true);
  EXPECT_EQ(morph_filter(full, {3, 7}), full);
  const BinaryMask empty(9, 9);
  EXPECT_EQ(morph_filter(empty, {3, 7}), empty);
}

TEST(Morphology, ErodeAndDilateByHand) {
  BinaryMask block(8, 8);
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x) block.set(x, y, true);
  const BinaryMask e = erode(block, 3);
  EXPECT_EQ(e.count(), 4u);
  EXPECT_TRUE(e.at(3, 3) && e.at(4, 4));
  const BinaryMask d = dilate(single_pixel(8, 8, 0, 0), 3);
  EXPECT_EQ(d.count(), 4u);  // clipped at the border
  // Outside the image counts as unset, so erosion eats the frame border.
  EXPECT_FALSE(erode(BinaryMask(5, 5, true), 3).at(0, 2));
}

TEST(Morphology, UnitSizesAreIdentity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> v(15 * 11);
    for (auto& x : v) x = unit_uniform(rng) < 0.5;
    const BinaryMask m(15, 11, v);
    ASSERT_EQ(morph_filter(m, MorphologyConfig::disabled()), m);
  }
}

TEST(Morphology, ConfigValidationAndScaling) {
  EXPECT_THROW((MorphologyConfig{2, 7}.validate()), InputError);
  EXPECT_THROW((MorphologyConfig{3, 0}.validate()), InputError);
  const MorphologyConfig d = MorphologyConfig::image_defaults();
  EXPECT_EQ(d.scaled_for_width(384), d);
  EXPECT_EQ(d.scaled_for_width(192), (MorphologyConfig{1, 3}));
  EXPECT_EQ(d.scaled_for_width(1152), (MorphologyConfig{9, 21}));
  EXPECT_EQ(d.scaled_for_width(10), (MorphologyConfig{1, 1}));
}

TEST(ReconstructTarget, IdentityWithoutFilteringIsExact) {
  const PlaneDepthSchedule s;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Image img = noise_image(40, 30, seed);
    const auto r = reconstruct_target(img, smooth_depth(40, 30, s, seed), CameraPose::identity(), s,
                                      MorphologyConfig::disabled());
    ASSERT_EQ(r.image, img);
    ASSERT_EQ(r.valid.count(), 1200u);
  }
}

TEST(ReconstructTarget, IdentityWithDefaultFilteringStaysClose) {
  const PlaneDepthSchedule s;
  const int w = 96, h = 72;
  const Image img = textured_image(w, h, 3);
  const DepthMap d = random_layered_depth(w, h, s, 3, 6);
  const auto r = reconstruct_target(img, d, CameraPose::identity(), s);
  EXPECT_EQ(r.valid.count(), static_cast<std::size_t>(w * h));
  EXPECT_LE(masked_mad(r.image, img, BinaryMask(w, h, true)), 2.0 / 255.0);
}

TEST(ReconstructTarget, ContentPushedOutIsFilledWithFlippedSource) {
  const PlaneDepthSchedule s;
  const Image img = textured_image(32, 24, 4);
  const auto r = reconstruct_target(img, smooth_depth(32, 24, s, 4), shift_x(500.0), s);
  EXPECT_EQ(r.valid.count(), 0u);
  EXPECT_EQ(r.image, flip_horizontal(img));
  const auto m = reconstruct_target(img, smooth_depth(32, 24, s, 4), shift_x(500.0), s,
                                    MorphologyConfig::image_defaults(), HoleFill::mask_only);
  for (double v : m.image.values()) EXPECT_EQ(v, 0.0);
}

TEST(ReconstructTarget, ShapeMismatchRejected) {
  EXPECT_THROW(reconstruct_target(Image(4, 4, 3), DepthMap(4, 5, 0.5), CameraPose::identity(), PlaneDepthSchedule{}),
               InputError);
}

TEST(WarpDepth, IdentityWithoutFilteringSnapsToPlanes) {
  const PlaneDepthSchedule s;
  const DepthMap d = smooth_depth(30, 20, s, 5);
  const DepthWarp r = warp_depth(d, CameraPose::identity(), s, MorphologyConfig::disabled());
  EXPECT_EQ(r.depth, snap_to_planes(d, s));
  EXPECT_EQ(r.valid.count(), 600u);
}

TEST(WarpDepth, ConstantDepthStaysConstantInsideValid) {
  const PlaneDepthSchedule s;
  const DepthMap d(40, 30, 0.6);
  const double center = s.disparity(s.bin_of(0.6));
  PoseSampler sampler({0.05, 2.0, 2});
  for (int i = 0; i < 5; ++i) {
    const DepthWarp r = warp_depth(d, sampler.next(), s);
    ASSERT_GT(r.valid.count(), 0u);
    for (std::size_t p = 0; p < r.valid.values().size(); ++p)
      if (r.valid.values()[p]) {
        ASSERT_NEAR(r.depth.values()[p], center, 1e-12);
      }
  }
}

TEST(WarpDepth, ValidMaskMatchesImageReconstructionGeometry) {
  const PlaneDepthSchedule s;
  const OcclusionScene scene = occlusion_scene(64, 48, s);
  PoseSampler sampler({0.05, 2.0, 6});
  for (int i = 0; i < 4; ++i) {
    const CameraPose pose = sampler.next();
    const MorphologyConfig cfg = MorphologyConfig::depth_defaults();
    const DepthWarp dw = warp_depth(scene.depth, pose, s, cfg);
    const auto rt = reconstruct_target(scene.image, scene.depth, pose, s, cfg);
    EXPECT_TRUE(subset(dw.valid, dilate(rt.valid, 3)));
    EXPECT_EQ(dw.valid, rt.valid);
  }
}

TEST(NaiveScatter, IdentityIsExact) {
  const PlaneDepthSchedule s;
  const Image img = noise_image(20, 16, 1);
  const ScatterResult r = naive_forward_scatter(img, smooth_depth(20, 16, s, 1), CameraPose::identity(), s);
  EXPECT_EQ(r.image, img);
  EXPECT_EQ(r.valid.count(), 320u);
}

TEST(IsolatedPixels, CountsOnlyLoneLabels) {
  const BinaryMask valid(5, 5, true);
  std::vector<int> label(25, 0);
  label[12] = 3;  // center pixel differs from all neighbors
  EXPECT_EQ(count_isolated_pixels(label, valid), 1u);
  label[13] = 3;
  EXPECT_EQ(count_isolated_pixels(label, valid), 0u);
  BinaryMask lone(5, 5);
  lone.set(0, 0, true);
  EXPECT_EQ(count_isolated_pixels(std::vector<int>(25, 1), lone), 1u);
}

TEST(FlyingPixels, NaiveScatterShowsThemAndFilteringRemovesThem) {
  const PlaneDepthSchedule s;
  const FlyingPixelScene scene = flying_pixel_scene(384, 288, s);
  const SelfSupPanels p = selfsup_panels(scene.image, scene.depth, shift_x(0.05), s, {3, 7});
  EXPECT_GE(p.naive_isolated, scene.specks.size() / 2);
  EXPECT_EQ(p.filtered_isolated, 0u);
}

TEST(SelfSup, DeterministicAcrossThreadCounts) {
  const PlaneDepthSchedule s;
  const OcclusionScene scene = occlusion_scene(80, 60, s);
  const CameraPose pose = sample_pose({0.05, 2.0, 1});
  set_thread_count(1);
  const auto a = reconstruct_target(scene.image, scene.depth, pose, s);
  const auto da = warp_depth(scene.depth, pose, s);
  set_thread_count(4);
  const auto b = reconstruct_target(scene.image, scene.depth, pose, s);
  const auto db = warp_depth(scene.depth, pose, s);
  set_thread_count(0);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.valid, b.valid);
  EXPECT_EQ(da.depth, db.depth);
}
