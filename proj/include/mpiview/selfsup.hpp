// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/image_ops.hpp>
#include <mpiview/mpi.hpp>
#include <mpiview/parallel.hpp>
#include <mpiview/slicing.hpp>
#include <mpiview/warp.hpp>

#include <cmath>
#include <optional>
#include <vector>

namespace mpiview {

/// Square structuring-element sizes for erosion followed by dilation.
struct MorphologyConfig {
  int erode_size = 3;
  int dilate_size = 7;

  static MorphologyConfig image_defaults() { return {3, 7}; }
  static MorphologyConfig depth_defaults() { return {3, 5}; }
  static MorphologyConfig disabled() { return {1, 1}; }

  void validate() const {
    if (erode_size < 1 || erode_size % 2 == 0 || dilate_size < 1 || dilate_size % 2 == 0)
      throw InputError("morphology sizes must be odd and >= 1");
  }

  /// Sizes are tuned for 384-pixel-wide images; scale to nearest odd size.
  [[nodiscard]] MorphologyConfig scaled_for_width(int width) const {
    auto scale = [width](int size) {
      const double target = size * (static_cast<double>(width) / 384.0);
      const int odd = 2 * static_cast<int>(std::lround((target - 1.0) / 2.0)) + 1;
      return std::max(1, odd);
    };
    return {scale(erode_size), scale(dilate_size)};
  }

  friend bool operator==(const MorphologyConfig&, const MorphologyConfig&) = default;
};

/// How disoccluded pixels of a reconstructed view are treated.
enum class HoleFill {
  flipped,    // fill with the horizontally flipped source
  mask_only,  // leave zero; consumers mask their losses with `valid`
};

namespace detail {

/// Counts of set pixels in a sliding window of `size` along rows (or
/// columns); pixels outside the image count as unset.
inline std::vector<int> window_counts(const std::vector<std::uint8_t>& in, int w, int h, int size, bool along_rows) {
  const int r = size / 2;
  std::vector<int> out(in.size(), 0);
  const int lines = along_rows ? h : w;
  const int len = along_rows ? w : h;
  std::vector<int> prefix(len + 1);
  for (int l = 0; l < lines; ++l) {
    auto at = [&](int i) -> std::size_t {
      return along_rows ? static_cast<std::size_t>(l) * w + i : static_cast<std::size_t>(i) * w + l;
    };
    prefix[0] = 0;
    for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + in[at(i)];
    for (int i = 0; i < len; ++i) {
      const int lo = std::max(0, i - r), hi = std::min(len, i + r + 1);
      out[at(i)] = prefix[hi] - prefix[lo];
    }
  }
  return out;
}

inline std::vector<std::uint8_t> square_filter(const std::vector<std::uint8_t>& in, int w, int h, int size, bool erode) {
  if (size == 1) return in;
  const auto rows = window_counts(in, w, h, size, true);
  std::vector<std::uint8_t> stage(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) stage[i] = erode ? (rows[i] == size) : (rows[i] > 0);
  const auto cols = window_counts(stage, w, h, size, false);
  std::vector<std::uint8_t> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = erode ? (cols[i] == size) : (cols[i] > 0);
  return out;
}

}  // namespace detail

inline BinaryMask erode(const BinaryMask& mask, int size) {
  std::vector<std::uint8_t> v(mask.values().begin(), mask.values().end());
  return {mask.width(), mask.height(), detail::square_filter(v, mask.width(), mask.height(), size, true)};
}

inline BinaryMask dilate(const BinaryMask& mask, int size) {
  std::vector<std::uint8_t> v(mask.values().begin(), mask.values().end());
  return {mask.width(), mask.height(), detail::square_filter(v, mask.width(), mask.height(), size, false)};
}

/// Erosion then dilation with square elements; outside the image counts as 0.
inline BinaryMask morph_filter(const BinaryMask& mask, const MorphologyConfig& cfg) {
  cfg.validate();
  return dilate(erode(mask, cfg.erode_size), cfg.dilate_size);
}

inline SliceStack morph_filter(const SliceStack& slices, const MorphologyConfig& cfg) {
  SliceStack out{{}, slices.schedule};
  out.masks.resize(slices.masks.size());
  for (std::size_t i = 0; i < slices.masks.size(); ++i) out.masks[i] = morph_filter(slices.masks[i], cfg);
  return out;
}

/// Output of warping a slice stack to another view and over-compositing it.
struct SliceComposite {
  std::vector<double> values;   // composited payload, w*h*channels; weight-normalized where valid
  std::vector<double> weight;   // summed warped weights per pixel
  std::vector<int> dominant;    // slice with the largest weight, -1 if none
  BinaryMask valid;             // weight > coverage threshold
  int width = 0;
  int height = 0;
  int channels = 0;
};

/// Warps each slice with its plane homography and over-composites far to
/// near. A slice carries either the per-pixel `payload` (masked by the slice)
/// or, when `payload` is empty, its plane disparity. The warped premultiplied
/// payload is divided by the warped alpha before compositing, and valid
/// pixels are divided by their summed weight.
inline SliceComposite warp_slices(const SliceStack& slices, const PixelView& payload, const Intrinsics& k,
                                  const CameraPose& pose) {
  const PlaneDepthSchedule& schedule = slices.schedule;
  const int d = static_cast<int>(slices.masks.size());
  const int w = slices.width(), h = slices.height();
  const int nc = payload.empty() ? 1 : payload.channels;
  const std::size_t n = detail::pixel_count(w, h);

  // Premultiplied slice payloads: (q_i * value, q_i) interleaved per pixel.
  std::vector<std::vector<double>> layers;
  std::vector<int> slice_of;
  std::vector<detail::InverseMap> maps;
  for (int i = 0; i < d; ++i) {
    const auto q = slices.masks[i].values();
    if (std::none_of(q.begin(), q.end(), [](std::uint8_t v) { return v != 0; })) continue;
    std::vector<double> layer(n * (nc + 1), 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      if (!q[p]) continue;
      for (int c = 0; c < nc; ++c)
        layer[p * (nc + 1) + c] = payload.empty() ? schedule.disparity(i) : payload.data[p * nc + c];
      layer[p * (nc + 1) + nc] = 1.0;
    }
    layers.push_back(std::move(layer));
    slice_of.push_back(i);
    maps.emplace_back(plane_homography(k, pose, 1.0 / schedule.disparity(i)));
  }

  SliceComposite out;
  out.width = w;
  out.height = h;
  out.channels = nc;
  out.values.assign(n * nc, 0.0);
  out.weight.assign(n, 0.0);
  out.dominant.assign(n, -1);
  std::vector<std::uint8_t> valid(n, 0);
  const int active = static_cast<int>(layers.size());
  parallel_rows(h, [&](int y) {
    std::vector<double> samples(static_cast<std::size_t>(active) * (nc + 1));
    std::vector<double> a(active), wt(active);
    for (int x = 0; x < w; ++x) {
      for (int l = 0; l < active; ++l) {
        double* s = samples.data() + static_cast<std::size_t>(l) * (nc + 1);
        double sx = 0, sy = 0;
        const PixelView view{layers[l], w, h, nc + 1};
        if (maps[l](x, y, sx, sy)) {
          detail::bilinear(view, sx, sy, s);
        } else {
          std::fill(s, s + nc + 1, 0.0);
        }
        a[l] = s[nc];
      }
      detail::over_weights(a.data(), active, wt.data());
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      double sum = 0.0, best = 0.0;
      for (int l = 0; l < active; ++l) {
        if (!(wt[l] > 0.0)) continue;
        const double* s = samples.data() + static_cast<std::size_t>(l) * (nc + 1);
        for (int c = 0; c < nc; ++c) out.values[p * nc + c] += (s[c] / s[nc]) * wt[l];
        sum += wt[l];
        if (wt[l] >= best) {
          best = wt[l];
          out.dominant[p] = slice_of[l];
        }
      }
      out.weight[p] = sum;
      valid[p] = sum > kCoverageThreshold ? 1 : 0;
      // Renormalize covered pixels so partial coverage at the frame edge does
      // not darken colors or pull disparities toward zero.
      if (valid[p] && sum != 1.0)
        for (int c = 0; c < nc; ++c) out.values[p * nc + c] /= sum;
    }
  });
  out.valid = BinaryMask(w, h, std::move(valid));
  return out;
}

struct TargetReconstruction {
  Image image;       // reconstructed target view, holes filled per HoleFill
  BinaryMask valid;  // pixels covered by warped slices
  Image warped;      // composite before hole filling
};

/// Slices the source by depth, filters each slice, warps the slices to the
/// target pose and composites them; disocclusions are filled.
inline TargetReconstruction reconstruct_target(const Image& source, const DepthMap& depth, const CameraPose& pose,
                                               const PlaneDepthSchedule& schedule,
                                               const MorphologyConfig& cfg = MorphologyConfig::image_defaults(),
                                               HoleFill fill = HoleFill::flipped,
                                               const std::optional<Intrinsics>& intrinsics = std::nullopt) {
  require_same_size(source, depth, "reconstruct_target");
  const SliceStack slices = morph_filter(quantize_depth(depth, schedule), cfg);
  const Intrinsics k = intrinsics.value_or(Intrinsics::standard(source.width(), source.height()));
  const SliceComposite comp = warp_slices(slices, source.view(), k, pose);
  Image warped(comp.width, comp.height, comp.channels, comp.values);
  std::vector<double> filled = comp.values;
  if (fill == HoleFill::flipped) {
    const Image flipped = flip_horizontal(source);
    const auto fv = flipped.values();
    const int nc = source.channels();
    for (std::size_t p = 0; p < comp.weight.size(); ++p)
      if (!comp.valid.values()[p])
        for (int c = 0; c < nc; ++c) filled[p * nc + c] = fv[p * nc + c];
  } else {
    const int nc = source.channels();
    for (std::size_t p = 0; p < comp.weight.size(); ++p)
      if (!comp.valid.values()[p])
        for (int c = 0; c < nc; ++c) filled[p * nc + c] = 0.0;
  }
  return {Image(comp.width, comp.height, comp.channels, std::move(filled)), comp.valid, std::move(warped)};
}

struct DepthWarp {
  DepthMap depth;    // warped disparity, holes filled per HoleFill
  BinaryMask valid;
};

/// Same slice-warp-composite as reconstruct_target, carrying each slice's
/// plane disparity instead of colors.
inline DepthWarp warp_depth(const DepthMap& depth, const CameraPose& pose, const PlaneDepthSchedule& schedule,
                            const MorphologyConfig& cfg = MorphologyConfig::depth_defaults(),
                            HoleFill fill = HoleFill::flipped,
                            const std::optional<Intrinsics>& intrinsics = std::nullopt) {
  const SliceStack slices = morph_filter(quantize_depth(depth, schedule), cfg);
  const Intrinsics k = intrinsics.value_or(Intrinsics::standard(depth.width(), depth.height()));
  SliceComposite comp = warp_slices(slices, PixelView{}, k, pose);
  if (fill == HoleFill::flipped) {
    const DepthMap flipped = flip_horizontal(depth);
    for (std::size_t p = 0; p < comp.values.size(); ++p)
      if (!comp.valid.values()[p]) comp.values[p] = flipped.values()[p];
  } else {
    for (std::size_t p = 0; p < comp.values.size(); ++p)
      if (!comp.valid.values()[p]) comp.values[p] = 0.0;
  }
  return {DepthMap(comp.width, comp.height, std::move(comp.values)), comp.valid};
}

/// Result of naive per-pixel forward projection.
struct ScatterResult {
  Image image;
  BinaryMask valid;
  std::vector<int> label;  // depth bin of the winning source pixel, -1 if none
};

/// Baseline forward projection: every source pixel is projected through the
/// homography of its own disparity and written to the nearest target pixel;
/// the larger disparity wins collisions. Sequential, row-major.
inline ScatterResult naive_forward_scatter(const Image& source, const DepthMap& depth, const CameraPose& pose,
                                           const PlaneDepthSchedule& schedule,
                                           const std::optional<Intrinsics>& intrinsics = std::nullopt) {
  require_same_size(source, depth, "naive_forward_scatter");
  const int w = source.width(), h = source.height(), nc = source.channels();
  const Intrinsics k = intrinsics.value_or(Intrinsics::standard(w, h));
  std::vector<double> color(source.values().size(), 0.0);
  std::vector<double> zbuf(detail::pixel_count(w, h), -1.0);
  std::vector<int> label(detail::pixel_count(w, h), -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double sigma = depth.at(x, y);
      if (!(sigma > 0.0)) continue;
      const Homography hm = plane_homography(k, pose, 1.0 / sigma);
      double tx = 0, ty = 0;
      if (!hm.apply(x, y, tx, ty)) continue;
      const long ix = std::lround(tx), iy = std::lround(ty);
      if (ix < 0 || iy < 0 || ix >= w || iy >= h) continue;
      const std::size_t p = static_cast<std::size_t>(iy) * w + ix;
      if (sigma <= zbuf[p]) continue;
      zbuf[p] = sigma;
      label[p] = schedule.bin_of(sigma);
      for (int c = 0; c < nc; ++c) color[p * nc + c] = source.at(x, y, c);
    }
  std::vector<std::uint8_t> valid(zbuf.size());
  for (std::size_t p = 0; p < zbuf.size(); ++p) valid[p] = zbuf[p] >= 0.0 ? 1 : 0;
  return {Image(w, h, nc, std::move(color)), BinaryMask(w, h, std::move(valid)), std::move(label)};
}

/// Valid pixels none of whose valid 8-neighbors share their label.
inline std::size_t count_isolated_pixels(const std::vector<int>& label, const BinaryMask& valid) {
  const int w = valid.width(), h = valid.height();
  std::size_t isolated = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!valid.at(x, y)) continue;
      const int own = label[valid.index(x, y)];
      bool lonely = true;
      for (int dy = -1; dy <= 1 && lonely; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || !valid.at(nx, ny)) continue;
          if (label[valid.index(nx, ny)] == own) {
            lonely = false;
            break;
          }
        }
      if (lonely) ++isolated;
    }
  return isolated;
}

/// Per-stage outputs of target reconstruction, for inspection.
struct SelfSupPanels {
  Image source;
  DepthMap depth;
  ScatterResult naive;
  SliceComposite filtered;
  Image filtered_image;
  BinaryMask valid;
  Image filled;
  SliceStack slices;
  SliceStack filtered_slices;
  std::size_t naive_isolated = 0;
  std::size_t filtered_isolated = 0;
};

inline SelfSupPanels selfsup_panels(const Image& source, const DepthMap& depth, const CameraPose& pose,
                                    const PlaneDepthSchedule& schedule,
                                    const MorphologyConfig& cfg = MorphologyConfig::image_defaults()) {
  require_same_size(source, depth, "selfsup_panels");
  SelfSupPanels out;
  out.source = source;
  out.depth = depth;
  out.naive = naive_forward_scatter(source, depth, pose, schedule);
  out.slices = quantize_depth(depth, schedule);
  out.filtered_slices = morph_filter(out.slices, cfg);
  const Intrinsics k = Intrinsics::standard(source.width(), source.height());
  out.filtered = warp_slices(out.filtered_slices, source.view(), k, pose);
  out.filtered_image = Image(source.width(), source.height(), source.channels(), out.filtered.values);
  out.valid = out.filtered.valid;
  out.filled = reconstruct_target(source, depth, pose, schedule, cfg).image;
  out.naive_isolated = count_isolated_pixels(out.naive.label, out.naive.valid);
  out.filtered_isolated = count_isolated_pixels(out.filtered.dominant, out.filtered.valid);
  return out;
}

}  // namespace mpiview
