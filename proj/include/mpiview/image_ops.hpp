// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>

#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

namespace mpiview {

/// Per-channel bilinear sample; channels beyond the source count are zero.
struct BilinearSample {
  std::array<double, 4> value{};
  bool in_bounds = false;
};

namespace detail {

/// Zero-padded bilinear interpolation into `out` (view.channels values).
/// Returns false when no neighbor with non-zero weight lies inside the image.
inline bool bilinear(const PixelView& view, double x, double y, double* out) {
  const int nc = view.channels;
  for (int c = 0; c < nc; ++c) out[c] = 0.0;
  if (!(x > -1.0 && y > -1.0 && x < view.width && y < view.height)) return false;
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  const int x0 = static_cast<int>(xf);
  const int y0 = static_cast<int>(yf);
  const double ax = x - xf;
  const double ay = y - yf;
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  bool hit = false;
  for (int j = 0; j < 2; ++j) {
    const int yy = y0 + j;
    if (wy[j] == 0.0 || yy < 0 || yy >= view.height) continue;
    for (int i = 0; i < 2; ++i) {
      const int xx = x0 + i;
      const double w = wx[i] * wy[j];
      if (w == 0.0 || xx < 0 || xx >= view.width) continue;
      hit = true;
      const double* px = view.data.data() + (static_cast<std::size_t>(yy) * view.width + xx) * nc;
      for (int c = 0; c < nc; ++c) out[c] += w * px[c];
    }
  }
  return hit;
}

template <typename Buffer>
concept FloatRaster = std::same_as<Buffer, Image> || std::same_as<Buffer, DepthMap>;

template <FloatRaster Buffer>
Buffer make_like(const Buffer& like, int width, int height, std::vector<double> values) {
  if constexpr (std::same_as<Buffer, Image>) {
    return Image(width, height, like.channels(), std::move(values));
  } else {
    return DepthMap(width, height, std::move(values));
  }
}

}  // namespace detail

/// Bilinear sample at continuous pixel coordinates (pixel centers on integers).
inline BilinearSample bilinear_sample(const Image& img, double x, double y) {
  if (img.empty()) throw InputError("bilinear_sample on empty image");
  BilinearSample s;
  s.in_bounds = detail::bilinear(img.view(), x, y, s.value.data());
  return s;
}

template <detail::FloatRaster Buffer>
Buffer flip_horizontal(const Buffer& src) {
  const int w = src.width(), h = src.height(), nc = src.channels();
  std::vector<double> out(src.values().size());
  const auto in = src.values();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c)
        out[(static_cast<std::size_t>(y) * w + x) * nc + c] =
            in[(static_cast<std::size_t>(y) * w + (w - 1 - x)) * nc + c];
  return detail::make_like(src, w, h, std::move(out));
}

inline BinaryMask flip_horizontal(const BinaryMask& src) {
  const int w = src.width(), h = src.height();
  std::vector<std::uint8_t> out(src.values().size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] = src.at(w - 1 - x, y) ? 1 : 0;
  return {w, h, std::move(out)};
}

/// 2x2 average pooling; a trailing odd row or column is dropped.
template <detail::FloatRaster Buffer>
Buffer downsample_by_2(const Buffer& src) {
  if (src.width() < 2 || src.height() < 2) throw InputError("downsample_by_2 needs width and height >= 2");
  const int w = src.width() / 2, h = src.height() / 2, nc = src.channels();
  const PixelView v = src.view();
  std::vector<double> out(static_cast<std::size_t>(w) * h * nc);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) {
        const double sum = v.at(2 * x, 2 * y, c) + v.at(2 * x + 1, 2 * y, c) + v.at(2 * x, 2 * y + 1, c) +
                           v.at(2 * x + 1, 2 * y + 1, c);
        out[(static_cast<std::size_t>(y) * w + x) * nc + c] = sum * 0.25;
      }
  return detail::make_like(src, w, h, std::move(out));
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
template <detail::FloatRaster Buffer>
Buffer resize_bilinear(const Buffer& src, int width, int height) {
  if (width < 1 || height < 1) throw InputError("resize target must be at least 1x1");
  if (src.width() == width && src.height() == height) return src;
  const PixelView v = src.view();
  const int nc = src.channels();
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  std::vector<double> out(static_cast<std::size_t>(width) * height * nc);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double ay = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double ax = fx - x0;
      for (int c = 0; c < nc; ++c) {
        const double top = v.at(x0, y0, c) * (1.0 - ax) + v.at(x1, y0, c) * ax;
        const double bottom = v.at(x0, y1, c) * (1.0 - ax) + v.at(x1, y1, c) * ax;
        out[(static_cast<std::size_t>(y) * width + x) * nc + c] = top * (1.0 - ay) + bottom * ay;
      }
    }
  }
  return detail::make_like(src, width, height, std::move(out));
}

template <detail::FloatRaster Buffer>
Buffer crop(const Buffer& src, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || x0 + width > src.width() || y0 + height > src.height())
    throw InputError("crop window outside the image");
  const int nc = src.channels();
  const PixelView v = src.view();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(width) * height * nc);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < nc; ++c) out.push_back(v.at(x0 + x, y0 + y, c));
  return detail::make_like(src, width, height, std::move(out));
}

/// Scales so the image covers width x height, then crops the center.
template <detail::FloatRaster Buffer>
Buffer resize_center_crop(const Buffer& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  const double scale = std::max(static_cast<double>(width) / src.width(), static_cast<double>(height) / src.height());
  const int sw = std::max(width, static_cast<int>(std::lround(src.width() * scale)));
  const int sh = std::max(height, static_cast<int>(std::lround(src.height() * scale)));
  const Buffer scaled = resize_bilinear(src, sw, sh);
  return crop(scaled, (sw - width) / 2, (sh - height) / 2, width, height);
}

}  // namespace mpiview
