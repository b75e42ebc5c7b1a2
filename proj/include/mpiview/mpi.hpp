// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/image_ops.hpp>
#include <mpiview/parallel.hpp>
#include <mpiview/slicing.hpp>

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mpiview {

namespace detail {

/// Over-composite weights for one pixel. `alphas` is ordered far to near.
/// Returns the transmittance left behind the farthest plane, prod(1 - a_i).
inline double over_weights(const double* alphas, int count, double* weights) {
  double transmittance = 1.0;
  for (int i = count - 1; i >= 0; --i) {
    weights[i] = alphas[i] * transmittance;
    transmittance *= 1.0 - alphas[i];
  }
  return transmittance;
}

inline void check_stack(std::span<const Image> stack, int channels, const char* what) {
  if (stack.empty()) throw InputError(std::string(what) + ": empty plane list");
  for (const Image& im : stack) {
    require_same_size(im, stack.front(), what);
    if (channels > 0 && im.channels() != channels)
      throw InputError(std::string(what) + ": expected " + std::to_string(channels) + "-channel planes");
  }
}

}  // namespace detail

/// Multiplane image: D RGBA planes at fixed disparities, ordered far to near.
/// The farthest plane (index 0) is opaque by construction; only the alphas
/// of planes 1..D-1 are supplied.
class Mpi {
 public:
  Mpi(Intrinsics intrinsics, std::vector<double> disparities, std::vector<Image> colors,
      std::vector<Image> front_alphas)
      : intrinsics_(intrinsics), disparities_(std::move(disparities)), colors_(std::move(colors)) {
    intrinsics_.validate();
    const std::size_t d = disparities_.size();
    if (d < 1) throw InputError("mpi needs at least one plane");
    if (colors_.size() != d) throw InputError("mpi: color plane count does not match disparity count");
    if (front_alphas.size() + 1 != d) throw InputError("mpi: expected D-1 alpha planes for the non-background planes");
    for (std::size_t i = 0; i < d; ++i) {
      if (!(disparities_[i] > 0.0) || !std::isfinite(disparities_[i]))
        throw InputError("mpi: plane disparities must be positive");
      if (i > 0 && !(disparities_[i] > disparities_[i - 1]))
        throw InputError("mpi: plane disparities must be strictly increasing (far to near)");
    }
    detail::check_stack(colors_, 3, "mpi colors");
    alphas_.reserve(d);
    alphas_.emplace_back(colors_.front().width(), colors_.front().height(), 1, 1.0);
    for (Image& a : front_alphas) {
      if (a.channels() != 1) throw InputError("mpi: alpha planes must have one channel");
      require_same_size(a, colors_.front(), "mpi alphas");
      alphas_.push_back(std::move(a));
    }
  }

  [[nodiscard]] int size() const { return static_cast<int>(disparities_.size()); }
  [[nodiscard]] int width() const { return colors_.front().width(); }
  [[nodiscard]] int height() const { return colors_.front().height(); }
  [[nodiscard]] const Intrinsics& intrinsics() const { return intrinsics_; }
  [[nodiscard]] double disparity(int i) const { return disparities_[i]; }
  [[nodiscard]] std::span<const double> disparities() const { return disparities_; }
  [[nodiscard]] const Image& color(int i) const { return colors_[i]; }
  [[nodiscard]] const Image& alpha(int i) const { return alphas_[i]; }
  [[nodiscard]] std::span<const Image> colors() const { return colors_; }
  [[nodiscard]] std::span<const Image> alphas() const { return alphas_; }

  friend bool operator==(const Mpi&, const Mpi&) = default;

 private:
  Intrinsics intrinsics_;
  std::vector<double> disparities_;
  std::vector<Image> colors_;
  std::vector<Image> alphas_;
};

/// w_i = a_i * prod_{j>i} (1 - a_j), per pixel.
inline std::vector<Image> blending_weights(std::span<const Image> alphas) {
  detail::check_stack(alphas, 1, "blending_weights");
  const int d = static_cast<int>(alphas.size());
  const int w = alphas.front().width(), h = alphas.front().height();
  std::vector<std::vector<double>> out(d, std::vector<double>(detail::pixel_count(w, h)));
  parallel_rows(h, [&](int y) {
    std::vector<double> a(d), wt(d);
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      for (int i = 0; i < d; ++i) a[i] = alphas[i].values()[p];
      detail::over_weights(a.data(), d, wt.data());
      for (int i = 0; i < d; ++i) out[i][p] = wt[i];
    }
  });
  std::vector<Image> result;
  result.reserve(d);
  for (auto& v : out) result.emplace_back(w, h, 1, std::move(v));
  return result;
}

/// c_i = w_i * source + (1 - w_i) * background.
inline std::vector<Image> plane_colors(const Image& source, const Image& background, std::span<const Image> weights) {
  require_same_size(source, background, "plane_colors");
  if (source.channels() != background.channels()) throw InputError("plane_colors: channel mismatch");
  detail::check_stack(weights, 1, "plane_colors weights");
  require_same_size(source, weights.front(), "plane_colors");
  const int nc = source.channels();
  std::vector<Image> out;
  out.reserve(weights.size());
  for (const Image& wimg : weights) {
    std::vector<double> v(source.values().size());
    const auto s = source.values(), b = background.values(), wv = wimg.values();
    for (std::size_t p = 0; p < wv.size(); ++p)
      for (int c = 0; c < nc; ++c) v[p * nc + c] = wv[p] * s[p * nc + c] + (1.0 - wv[p]) * b[p * nc + c];
    out.emplace_back(source.width(), source.height(), nc, std::move(v));
  }
  return out;
}

/// Sum_i c_i w_i, accumulated far to near, clamped to [0,1].
inline Image composite_color(std::span<const Image> colors, std::span<const Image> weights) {
  detail::check_stack(colors, 0, "composite_color colors");
  detail::check_stack(weights, 1, "composite_color weights");
  if (colors.size() != weights.size()) throw InputError("composite_color: plane count mismatch");
  require_same_size(colors.front(), weights.front(), "composite_color");
  const int nc = colors.front().channels();
  for (const Image& c : colors)
    if (c.channels() != nc) throw InputError("composite_color: channel mismatch between planes");
  const int w = colors.front().width(), h = colors.front().height();
  std::vector<double> out(detail::pixel_count(w, h) * nc, 0.0);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < colors.size(); ++i) acc += colors[i].values()[p * nc + c] * weights[i].values()[p];
        out[p * nc + c] = acc;
      }
    }
  });
  return {w, h, nc, std::move(out)};
}

/// Regressed disparity: sum_i sigma_i w_i over the unwarped alphas.
inline DepthMap composite_depth(const Mpi& mpi) {
  const int d = mpi.size(), w = mpi.width(), h = mpi.height();
  std::vector<double> out(detail::pixel_count(w, h));
  parallel_rows(h, [&](int y) {
    std::vector<double> a(d), wt(d);
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      for (int i = 0; i < d; ++i) a[i] = mpi.alpha(i).values()[p];
      detail::over_weights(a.data(), d, wt.data());
      double acc = 0.0;
      for (int i = 0; i < d; ++i) acc += mpi.disparity(i) * wt[i];
      // The weights sum to 1, so only rounding can leave the plane range.
      out[p] = std::clamp(acc, mpi.disparity(0), mpi.disparity(d - 1));
    }
  });
  return {w, h, std::move(out)};
}

/// Deterministic stand-in for a learned MPI producer: slices the source by
/// its quantized disparity. Plane i holds the source where the pixel falls in
/// bin i and the background elsewhere; its alpha is the bin mask, except the
/// farthest plane which is opaque. Rendering at the identity pose returns the
/// source unchanged.
inline Mpi oracle_mpi(const Image& source, const DepthMap& depth, const PlaneDepthSchedule& schedule,
                      const std::optional<Image>& background = std::nullopt,
                      const std::optional<Intrinsics>& intrinsics = std::nullopt) {
  schedule.validate();
  require_same_size(source, depth, "oracle_mpi");
  if (source.channels() != 3) throw InputError("oracle_mpi: source must have 3 channels");
  const Image bg = background ? *background : flip_horizontal(source);
  require_same_size(source, bg, "oracle_mpi background");
  if (bg.channels() != 3) throw InputError("oracle_mpi: background must have 3 channels");

  const SliceStack slices = quantize_depth(depth, schedule);
  const int w = source.width(), h = source.height();
  std::vector<Image> colors;
  std::vector<Image> alphas;
  colors.reserve(schedule.count);
  alphas.reserve(schedule.count);
  const auto s = source.values(), b = bg.values();
  for (int i = 0; i < schedule.count; ++i) {
    const auto q = slices.masks[i].values();
    std::vector<double> c(s.size());
    for (std::size_t p = 0; p < q.size(); ++p)
      for (int ch = 0; ch < 3; ++ch) c[p * 3 + ch] = q[p] ? s[p * 3 + ch] : b[p * 3 + ch];
    colors.emplace_back(w, h, 3, std::move(c));
    if (i > 0) {
      std::vector<double> a(q.begin(), q.end());
      alphas.emplace_back(w, h, 1, std::move(a));
    }
  }
  return {intrinsics.value_or(Intrinsics::standard(w, h)), schedule.disparities(), std::move(colors), std::move(alphas)};
}

}  // namespace mpiview
