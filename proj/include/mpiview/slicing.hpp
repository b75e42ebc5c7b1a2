// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace mpiview {

/// D fronto-parallel planes, linearly spaced in disparity. Index 0 is the
/// farthest plane (smallest disparity).
struct PlaneDepthSchedule {
  int count = 32;
  double sigma_min = 0.01;
  double sigma_max = 1.0;

  void validate() const {
    if (count < 1) throw InputError("plane count must be >= 1");
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !std::isfinite(sigma_max))
      throw InputError("disparity range must satisfy 0 < sigma_min < sigma_max");
  }

  [[nodiscard]] double disparity(int i) const {
    if (count == 1) return sigma_min;
    return std::lerp(sigma_min, sigma_max, static_cast<double>(i) / (count - 1));
  }

  [[nodiscard]] std::vector<double> disparities() const {
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) out[i] = disparity(i);
    return out;
  }

  /// Nearest bin (0-based) for a disparity; out-of-range values clamp.
  [[nodiscard]] int bin_of(double sigma) const {
    if (count == 1) return 0;
    const double t = (sigma - sigma_min) / (sigma_max - sigma_min) * (count - 1);
    return static_cast<int>(std::clamp(std::round(t), 0.0, static_cast<double>(count - 1)));
  }
};

/// One binary mask per depth bin. Straight out of quantize_depth the masks
/// partition the image; filtering may break that.
struct SliceStack {
  std::vector<BinaryMask> masks;
  PlaneDepthSchedule schedule;

  [[nodiscard]] int width() const { return masks.empty() ? 0 : masks.front().width(); }
  [[nodiscard]] int height() const { return masks.empty() ? 0 : masks.front().height(); }
};

inline SliceStack quantize_depth(const DepthMap& depth, const PlaneDepthSchedule& schedule) {
  schedule.validate();
  if (depth.empty()) throw InputError("quantize_depth: empty depth map");
  const int w = depth.width(), h = depth.height();
  std::vector<std::vector<std::uint8_t>> bins(schedule.count, std::vector<std::uint8_t>(detail::pixel_count(w, h), 0));
  const auto values = depth.values();
  for (std::size_t p = 0; p < values.size(); ++p) bins[schedule.bin_of(values[p])][p] = 1;
  SliceStack stack{{}, schedule};
  stack.masks.reserve(schedule.count);
  for (auto& b : bins) stack.masks.emplace_back(w, h, std::move(b));
  return stack;
}

/// Min-max maps raw relative disparity onto [sigma_min, sigma_max]. A
/// constant map goes to sigma_max.
inline DepthMap normalize_disparity(const DepthMap& raw, const PlaneDepthSchedule& schedule) {
  schedule.validate();
  const auto values = raw.values();
  if (values.empty()) return raw;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size(), schedule.sigma_max);
  if (hi > lo) {
    const double span = schedule.sigma_max - schedule.sigma_min;
    for (std::size_t i = 0; i < values.size(); ++i)
      out[i] = schedule.sigma_min + (values[i] - lo) / (hi - lo) * span;
  }
  return {raw.width(), raw.height(), std::move(out)};
}

/// Replaces every disparity by its bin's plane disparity.
inline DepthMap snap_to_planes(const DepthMap& depth, const PlaneDepthSchedule& schedule) {
  schedule.validate();
  std::vector<double> out(depth.values().begin(), depth.values().end());
  for (double& v : out) v = schedule.disparity(schedule.bin_of(v));
  return {depth.width(), depth.height(), std::move(out)};
}

}  // namespace mpiview
