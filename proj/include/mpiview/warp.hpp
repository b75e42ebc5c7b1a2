// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/image_ops.hpp>
#include <mpiview/mpi.hpp>
#include <mpiview/parallel.hpp>

#include <array>
#include <cmath>
#include <vector>

namespace mpiview {

/// Plane-induced homography taking homogeneous source pixels to target pixels.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Homography(const Eigen::Matrix3d& m) : m_(m) {
    if (!m_.allFinite()) throw NumericError("homography has non-finite entries");
    if (!(std::abs(m_.determinant()) > 1e-12)) throw NumericError("homography is not invertible");
  }

  [[nodiscard]] const Eigen::Matrix3d& matrix() const { return m_; }
  [[nodiscard]] bool is_identity() const { return m_ == Eigen::Matrix3d::Identity(); }
  [[nodiscard]] Homography inverse() const {
    if (is_identity()) return {};
    return Homography(m_.inverse());
  }

  /// Maps (x,y); returns false for points on or behind the camera plane.
  [[nodiscard]] bool apply(double x, double y, double& ox, double& oy) const {
    const double w = m_(2, 0) * x + m_(2, 1) * y + m_(2, 2);
    if (!(w > 0.0)) return false;
    ox = (m_(0, 0) * x + m_(0, 1) * y + m_(0, 2)) / w;
    oy = (m_(1, 0) * x + m_(1, 1) * y + m_(1, 2)) / w;
    return true;
  }

 private:
  Eigen::Matrix3d m_;
};

/// H = K (R + t n^T / d) K^-1 for the plane z = d in the source camera.
inline Homography plane_homography(const Intrinsics& k, const CameraPose& pose, double depth) {
  k.validate();
  if (!(depth > 0.0) || !std::isfinite(depth)) throw InputError("plane_homography: depth must be positive and finite");
  if (pose.is_identity()) return {};
  Eigen::Matrix3d m = pose.rotation();
  m.col(2) += pose.translation() / depth;
  return Homography(k.matrix() * m * k.inverse_matrix());
}

namespace detail {

/// Source-image lookup position for one target pixel of an inverse warp.
struct InverseMap {
  Homography target_to_source;
  bool identity = true;

  explicit InverseMap(const Homography& source_to_target)
      : target_to_source(source_to_target.inverse()), identity(source_to_target.is_identity()) {}

  bool operator()(int x, int y, double& sx, double& sy) const {
    if (identity) {
      sx = x;
      sy = y;
      return true;
    }
    return target_to_source.apply(x, y, sx, sy);
  }
};

/// Inverse-warps a buffer; pixels mapping outside the source are zero.
inline std::vector<double> inverse_warp(const PixelView& src, const InverseMap& map) {
  const int w = src.width, h = src.height, nc = src.channels;
  std::vector<double> out(detail::pixel_count(w, h) * nc, 0.0);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double sx = 0, sy = 0;
      if (map(x, y, sx, sy)) detail::bilinear(src, sx, sy, out.data() + (static_cast<std::size_t>(y) * w + x) * nc);
    }
  });
  return out;
}

}  // namespace detail

struct WarpedPlane {
  Image color;
  Image alpha;
};

/// Inverse warp of one plane: each target pixel samples the source at H^-1 u.
inline WarpedPlane warp_plane(const Image& color, const Image& alpha, const Homography& h) {
  require_same_size(color, alpha, "warp_plane");
  if (alpha.channels() != 1) throw InputError("warp_plane: alpha must have one channel");
  if (h.is_identity()) return {color, alpha};
  const detail::InverseMap map(h);
  return {Image(color.width(), color.height(), color.channels(), detail::inverse_warp(color.view(), map)),
          Image(alpha.width(), alpha.height(), 1, detail::inverse_warp(alpha.view(), map))};
}

inline std::vector<WarpedPlane> warp_mpi(const Mpi& mpi, const CameraPose& pose) {
  std::vector<WarpedPlane> out;
  out.reserve(mpi.size());
  for (int i = 0; i < mpi.size(); ++i) {
    const Homography h = plane_homography(mpi.intrinsics(), pose, 1.0 / mpi.disparity(i));
    out.push_back(warp_plane(mpi.color(i), mpi.alpha(i), h));
  }
  return out;
}

struct RenderResult {
  Image image;          // composited target view
  DepthMap depth;       // regressed disparity in the source view
  BinaryMask coverage;  // summed warped weights > 0.5
};

inline constexpr double kCoverageThreshold = 0.5;

/// Warps every plane to `pose` and over-composites them. Produces the same
/// values as composite_color(warp_mpi(...), blending_weights(...)) without
/// materializing the warped planes.
inline RenderResult render_view(const Mpi& mpi, const CameraPose& pose) {
  const int d = mpi.size(), w = mpi.width(), h = mpi.height();
  std::vector<detail::InverseMap> maps;
  std::vector<char> active(d, 0);
  maps.reserve(d);
  for (int i = 0; i < d; ++i) {
    maps.emplace_back(plane_homography(mpi.intrinsics(), pose, 1.0 / mpi.disparity(i)));
    const auto a = mpi.alpha(i).values();
    active[i] = std::any_of(a.begin(), a.end(), [](double v) { return v > 0.0; }) ? 1 : 0;
  }
  std::vector<double> color(detail::pixel_count(w, h) * 3, 0.0);
  std::vector<std::uint8_t> coverage(detail::pixel_count(w, h), 0);
  parallel_rows(h, [&](int y) {
    std::vector<double> wt(d);
    std::vector<std::array<double, 2>> at(d);
    for (int x = 0; x < w; ++x) {
      // Near to far as in over_weights; once nothing shows through, every
      // farther weight is exactly zero and need not be sampled.
      double transmittance = 1.0;
      for (int i = d - 1; i >= 0; --i) {
        double a = 0.0;
        if (transmittance != 0.0 && active[i] && maps[i](x, y, at[i][0], at[i][1]))
          detail::bilinear(mpi.alpha(i).view(), at[i][0], at[i][1], &a);
        wt[i] = a * transmittance;
        transmittance *= 1.0 - a;
      }
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      double acc[3] = {0.0, 0.0, 0.0};
      double weight_sum = 0.0;
      for (int i = 0; i < d; ++i) {
        if (wt[i] == 0.0) continue;
        double c[3];
        detail::bilinear(mpi.color(i).view(), at[i][0], at[i][1], c);
        for (int ch = 0; ch < 3; ++ch) acc[ch] += c[ch] * wt[i];
        weight_sum += wt[i];
      }
      for (int ch = 0; ch < 3; ++ch) color[p * 3 + ch] = acc[ch];
      coverage[p] = weight_sum > kCoverageThreshold ? 1 : 0;
    }
  });
  return {Image(w, h, 3, std::move(color)), composite_depth(mpi), BinaryMask(w, h, std::move(coverage))};
}

}  // namespace mpiview
