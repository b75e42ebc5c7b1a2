// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#include <gtest/gtest.h>

#include "scenes.hpp"

using namespace mpiview;
using namespace mpiview::testing;

namespace {

std::vector<Image> constant_alphas(const std::vector<double>& a, int w = 2, int h = 2) {
  std::vector<Image> out;
  for (double v : a) out.emplace_back(w, h, 1, v);
  return out;
}

std::vector<Image> random_alphas(int d, int w, int h, std::mt19937_64& rng) {
  std::vector<Image> out;
  for (int i = 0; i < d; ++i) {
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (double& x : v) {
      const double u = unit_uniform(rng);
      x = u < 0.1 ? 0.0 : u > 0.9 ? 1.0 : unit_uniform(rng);
    }
    out.emplace_back(w, h, 1, std::move(v));
  }
  return out;
}

Mpi two_plane(double near_alpha) {
  const int w = 3, h = 2;
  std::vector<Image> colors{Image(w, h, 3, 0.2), Image(w, h, 3, 0.8)};
  return {Intrinsics::standard(w, h), {0.25, 1.0}, std::move(colors), constant_alphas({near_alpha}, w, h)};
}

}  // namespace

TEST(BlendingWeights, Examples) {
  auto w1 = blending_weights(constant_alphas({0.7}));
  EXPECT_EQ(w1[0].at(0, 0), 0.7);
  auto w2 = blending_weights(constant_alphas({0.5, 0.5}));
  EXPECT_EQ(w2[0].at(1, 1), 0.25);
  EXPECT_EQ(w2[1].at(1, 1), 0.5);
  auto w3 = blending_weights(constant_alphas({0.3, 0.9, 1.0}));
  EXPECT_EQ(w3[0].at(0, 0), 0.0);
  EXPECT_EQ(w3[1].at(0, 0), 0.0);
  EXPECT_EQ(w3[2].at(0, 0), 1.0);
}

TEST(BlendingWeights, PartitionOfUnity) {
  std::mt19937_64 rng(5);
  for (int d : {1, 2, 8, 32}) {
    for (int trial = 0; trial < 25; ++trial) {
      auto alphas = random_alphas(d, 4, 3, rng);
      const auto w = blending_weights(alphas);
      for (std::size_t p = 0; p < 12; ++p) {
        double sum = 0.0, leak = 1.0;
        for (int i = 0; i < d; ++i) {
          ASSERT_GE(w[i].values()[p], 0.0);
          ASSERT_LE(w[i].values()[p], 1.0);
          sum += w[i].values()[p];
          leak *= 1.0 - alphas[i].values()[p];
        }
        ASSERT_NEAR(sum + leak, 1.0, 1e-6);
      }
    }
  }
}

TEST(BlendingWeights, MonotoneInFrontAlpha) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto alphas = random_alphas(6, 2, 2, rng);
    const auto before = blending_weights(alphas);
    std::vector<double> raised(alphas.back().values().begin(), alphas.back().values().end());
    for (double& v : raised) v = v + (1.0 - v) * unit_uniform(rng);
    alphas.back() = Image(2, 2, 1, raised);
    const auto after = blending_weights(alphas);
    for (int i = 0; i < 5; ++i)
      for (std::size_t p = 0; p < 4; ++p) ASSERT_LE(after[i].values()[p], before[i].values()[p]);
  }
}

TEST(BlendingWeights, ShapeMismatchRejected) {
  std::vector<Image> a{Image(2, 2, 1, 0.5), Image(3, 2, 1, 0.5)};
  EXPECT_THROW(blending_weights(a), InputError);
}

TEST(PlaneColors, Examples) {
  const Image src(2, 1, 3, 0.8), bg(2, 1, 3, 0.2);
  EXPECT_EQ(plane_colors(src, bg, constant_alphas({1.0}, 2, 1))[0], src);
  EXPECT_EQ(plane_colors(src, bg, constant_alphas({0.0}, 2, 1))[0], bg);
  EXPECT_NEAR(plane_colors(src, bg, constant_alphas({0.5}, 2, 1))[0].at(1, 0, 2), 0.5, 1e-15);
  EXPECT_THROW(plane_colors(src, Image(3, 1, 3), constant_alphas({0.5}, 2, 1)), InputError);
}

TEST(CompositeColor, Examples) {
  const std::vector<Image> one{Image(2, 2, 3, 0.6)};
  EXPECT_EQ(composite_color(one, constant_alphas({1.0})), one[0]);
  const std::vector<Image> two{Image(2, 2, 1, 0.0), Image(2, 2, 1, 1.0)};
  EXPECT_EQ(composite_color(two, constant_alphas({0.25, 0.5})).at(0, 0), 0.5);
  const Image black = composite_color(two, constant_alphas({0.0, 0.0}));
  for (double v : black.values()) EXPECT_EQ(v, 0.0);
}

TEST(Mpi, FarPlaneIsOpaque) {
  const Mpi m = two_plane(0.3);
  EXPECT_EQ(m.size(), 2);
  for (double v : m.alpha(0).values()) EXPECT_EQ(v, 1.0);
  for (double v : m.alpha(1).values()) EXPECT_EQ(v, 0.3);
}

TEST(Mpi, RejectsBadStacks) {
  const int w = 2, h = 2;
  auto colors = [&] { return std::vector<Image>{Image(w, h, 3), Image(w, h, 3)}; };
  EXPECT_THROW(Mpi(Intrinsics::standard(w, h), {1.0, 0.5}, colors(), constant_alphas({1.0})), InputError);
  EXPECT_THROW(Mpi(Intrinsics::standard(w, h), {0.5, 1.0}, colors(), constant_alphas({1.0, 1.0})), InputError);
  EXPECT_THROW(Mpi(Intrinsics::standard(w, h), {0.0, 1.0}, colors(), constant_alphas({1.0})), InputError);
}

TEST(CompositeDepth, ClosedForms) {
  const int w = 2, h = 2;
  const Mpi single(Intrinsics::standard(w, h), {0.5}, {Image(w, h, 3)}, {});
  EXPECT_EQ(composite_depth(single), DepthMap(w, h, 0.5));
  EXPECT_EQ(composite_depth(two_plane(1.0)), DepthMap(3, 2, 1.0));
  EXPECT_EQ(composite_depth(two_plane(0.0)), DepthMap(3, 2, 0.25));
  EXPECT_EQ(composite_depth(two_plane(0.5)), DepthMap(3, 2, 0.625));
}

TEST(CompositeDepth, BoundedByPlaneRange) {
  std::mt19937_64 rng(17);
  for (int d : {1, 2, 8, 32}) {
    const PlaneDepthSchedule s{d, 0.05, 0.9};
    for (int trial = 0; trial < 10; ++trial) {
      auto alphas = random_alphas(d - 1, 5, 4, rng);
      std::vector<Image> colors(d, Image(5, 4, 3, 0.5));
      const Mpi m(Intrinsics::standard(5, 4), s.disparities(), colors, alphas);
      const DepthMap depth = composite_depth(m);
      for (double v : depth.values()) {
        ASSERT_GE(v, s.disparity(0) - 1e-12);
        ASSERT_LE(v, s.disparity(d - 1) + 1e-12);
      }
    }
  }
}

TEST(OracleMpi, IdentityRenderReproducesSource) {
  const PlaneDepthSchedule s;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Image img = seed % 2 ? noise_image(48, 36, seed) : textured_image(48, 36, seed);
    const DepthMap d = seed % 3 ? random_layered_depth(48, 36, s, seed) : smooth_depth(48, 36, s, seed);
    const Mpi m = oracle_mpi(img, d, s);
    const RenderResult r = render_view(m, CameraPose::identity());
    ASSERT_EQ(r.image, img);
    ASSERT_EQ(r.coverage.count(), 48u * 36u);
  }
}

TEST(OracleMpi, SingleBinAndSinglePlane) {
  const Image img = textured_image(20, 10, 2);
  const PlaneDepthSchedule s;
  const Mpi near = oracle_mpi(img, DepthMap(20, 10, s.sigma_max), s);
  EXPECT_EQ(near.color(s.count - 1), img);
  for (double v : near.alpha(s.count - 1).values()) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(render_view(near, CameraPose::identity()).image, img);

  const PlaneDepthSchedule one{1, 0.01, 1.0};
  const Mpi m = oracle_mpi(img, smooth_depth(20, 10, s, 1), one);
  ASSERT_EQ(m.size(), 1);
  EXPECT_EQ(m.color(0), img);
}

TEST(OracleMpi, BackgroundOutsideSlice) {
  const PlaneDepthSchedule s{2, 0.5, 1.0};
  const Image img = textured_image(6, 4, 3);
  const Image bg(6, 4, 3, 0.0);
  const DepthMap d = layered_depth(6, 4, 0.5, {{{0, 0, 3, 4}, 1.0}});
  const Mpi m = oracle_mpi(img, d, s, bg);
  EXPECT_EQ(m.color(1).at(0, 0, 0), img.at(0, 0, 0));
  EXPECT_EQ(m.color(1).at(4, 0, 0), 0.0);
  EXPECT_EQ(m.color(0).at(4, 0, 0), img.at(4, 0, 0));
  EXPECT_EQ(m.color(0).at(0, 0, 0), 0.0);
  EXPECT_THROW(oracle_mpi(img, DepthMap(5, 4, 0.5), s), InputError);
}
