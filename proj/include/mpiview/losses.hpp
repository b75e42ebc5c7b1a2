// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/image_ops.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mpiview {

/// C x h x w activation volume, channel-major.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, std::vector<double> values)
      : channels(c), height(h), width(w), data(std::move(values)) {
    if (c < 0 || h < 0 || w < 0) throw InputError("feature map dimensions must be non-negative");
    if (data.size() != static_cast<std::size_t>(c) * h * w) throw InputError("feature map buffer has wrong length");
    for (double v : data)
      if (!std::isfinite(v)) throw NumericError("feature map contains non-finite values");
  }

  [[nodiscard]] std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  [[nodiscard]] double at(int c, int y, int x) const { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

struct LossConfig {
  double alpha_grad = 0.5;  // weight of the multi-scale gradient terms
  int k_scales = 4;
  double beta = 0.01;       // feature (perceptual) loss weight
  double gamma = 0.0001;    // style loss weight

  void validate() const {
    if (!(alpha_grad >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) throw InputError("loss weights must be >= 0");
    if (k_scales < 1) throw InputError("k_scales must be >= 1");
  }
};

struct LossReport {
  double depth = 0.0;
  double pix = 0.0;
  double vgg = 0.0;
  double style = 0.0;
  double total = 0.0;
};

namespace detail {

inline BinaryMask downsample_mask(const BinaryMask& m) {
  const int w = m.width() / 2, h = m.height() / 2;
  std::vector<std::uint8_t> out(pixel_count(w, h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out[static_cast<std::size_t>(y) * w + x] =
          m.at(2 * x, 2 * y) && m.at(2 * x + 1, 2 * y) && m.at(2 * x, 2 * y + 1) && m.at(2 * x + 1, 2 * y + 1);
  return {w, h, std::move(out)};
}

/// Mean |grad_x| + mean |grad_y| of (a - b), forward differences.
inline double gradient_term(const DepthMap& a, const DepthMap& b, const BinaryMask* mask) {
  const int w = a.width(), h = a.height();
  auto diff = [&](int x, int y) { return a.at(x, y) - b.at(x, y); };
  double sx = 0.0, sy = 0.0;
  std::size_t nx = 0, ny = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w && (!mask || (mask->at(x, y) && mask->at(x + 1, y)))) {
        sx += std::abs(diff(x + 1, y) - diff(x, y));
        ++nx;
      }
      if (y + 1 < h && (!mask || (mask->at(x, y) && mask->at(x, y + 1)))) {
        sy += std::abs(diff(x, y + 1) - diff(x, y));
        ++ny;
      }
    }
  return (nx ? sx / nx : 0.0) + (ny ? sy / ny : 0.0);
}

}  // namespace detail

/// Mean |D - D^| plus alpha * sum over scales of the gradient-matching term.
/// Scale k is reached with k-1 halvings; scales too small to halve are skipped.
inline double depth_loss(const DepthMap& ref, const DepthMap& pred, const LossConfig& cfg = {},
                         const BinaryMask* mask = nullptr) {
  cfg.validate();
  require_same_size(ref, pred, "depth_loss");
  if (mask) require_same_size(ref, *mask, "depth_loss mask");
  double l1 = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < ref.height(); ++y)
    for (int x = 0; x < ref.width(); ++x) {
      if (mask && !mask->at(x, y)) continue;
      l1 += std::abs(ref.at(x, y) - pred.at(x, y));
      ++n;
    }
  double loss = n ? l1 / n : 0.0;

  DepthMap a = ref, b = pred;
  std::optional<BinaryMask> m;
  if (mask) m = *mask;
  for (int k = 0; k < cfg.k_scales; ++k) {
    if (k > 0) {
      if (a.width() < 2 || a.height() < 2) break;
      a = downsample_by_2(a);
      b = downsample_by_2(b);
      if (m) m = detail::downsample_mask(*m);
    }
    loss += cfg.alpha_grad * detail::gradient_term(a, b, m ? &*m : nullptr);
  }
  return loss;
}

/// Mean absolute difference over all pixels and channels (or masked pixels).
inline double pixel_loss(const Image& ref, const Image& pred, const BinaryMask* mask = nullptr) {
  require_same_size(ref, pred, "pixel_loss");
  if (ref.channels() != pred.channels()) throw InputError("pixel_loss: channel mismatch");
  if (mask) require_same_size(ref, *mask, "pixel_loss mask");
  const int nc = ref.channels();
  const auto a = ref.values(), b = pred.values();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.size() / nc; ++p) {
    if (mask && !mask->values()[p]) continue;
    for (int c = 0; c < nc; ++c) sum += std::abs(a[p * nc + c] - b[p * nc + c]);
    n += nc;
  }
  return n ? sum / n : 0.0;
}

namespace detail {
inline void check_levels(std::span<const FeatureMap> a, std::span<const FeatureMap> b, const char* what) {
  if (a.size() != b.size()) throw InputError(std::string(what) + ": feature level count mismatch");
  for (std::size_t j = 0; j < a.size(); ++j)
    if (!a[j].same_shape(b[j])) throw InputError(std::string(what) + ": feature shape mismatch at level " + std::to_string(j));
}

inline double mean_abs_diff(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return a.empty() ? 0.0 : sum / a.size();
}
}  // namespace detail

inline double feature_loss(std::span<const FeatureMap> ref, std::span<const FeatureMap> pred) {
  detail::check_levels(ref, pred, "feature_loss");
  double loss = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) loss += detail::mean_abs_diff(ref[j].data, pred[j].data);
  return loss;
}

/// G = F F^T / (C h w) with F the C x (h w) unrolled map; row-major C x C.
inline std::vector<double> gram_matrix(const FeatureMap& f) {
  if (f.channels < 1 || f.plane_size() == 0) throw InputError("gram_matrix: empty feature map");
  const int c = f.channels;
  const std::size_t n = f.plane_size();
  const double norm = static_cast<double>(c) * static_cast<double>(n);
  std::vector<double> g(static_cast<std::size_t>(c) * c);
  for (int a = 0; a < c; ++a)
    for (int b = a; b < c; ++b) {
      const double* fa = f.data.data() + a * n;
      const double* fb = f.data.data() + b * n;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += fa[i] * fb[i];
      g[static_cast<std::size_t>(a) * c + b] = g[static_cast<std::size_t>(b) * c + a] = sum / norm;
    }
  return g;
}

inline double style_loss(std::span<const FeatureMap> ref, std::span<const FeatureMap> pred) {
  detail::check_levels(ref, pred, "style_loss");
  double loss = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) loss += detail::mean_abs_diff(gram_matrix(ref[j]), gram_matrix(pred[j]));
  return loss;
}

inline LossReport total_loss(const LossReport& parts, const LossConfig& cfg = {}) {
  cfg.validate();
  for (double v : {parts.depth, parts.pix, parts.vgg, parts.style}) {
    if (!std::isfinite(v)) throw NumericError("loss term is not finite");
    if (v < 0.0) throw InputError("loss terms must be non-negative");
  }
  LossReport out = parts;
  out.total = parts.depth + parts.pix + cfg.beta * parts.vgg + cfg.gamma * parts.style;
  return out;
}

inline constexpr double kPsnrCap = 100.0;

/// PSNR in dB for unit dynamic range, capped at 100 dB.
inline double psnr(const Image& ref, const Image& pred) {
  require_same_size(ref, pred, "psnr");
  if (ref.channels() != pred.channels()) throw InputError("psnr: channel mismatch");
  const auto a = ref.values(), b = pred.values();
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sse += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = a.empty() ? 0.0 : sse / a.size();
  if (mse < 1e-10) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(size);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    g[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

/// Separable 'valid' filtering: output is (w-k+1) x (h-k+1).
inline std::vector<double> filter_valid(const std::vector<double>& in, int w, int h, const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += g[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over all fully-inside Gaussian windows, averaged across channels.
inline double ssim(const Image& ref, const Image& pred, const SsimParams& params = {}) {
  require_same_size(ref, pred, "ssim");
  if (ref.channels() != pred.channels()) throw InputError("ssim: channel mismatch");
  if (ref.width() < params.window || ref.height() < params.window)
    throw InputError("ssim: image smaller than the " + std::to_string(params.window) + "x" +
                     std::to_string(params.window) + " window");
  const int w = ref.width(), h = ref.height(), nc = ref.channels();
  const auto g = detail::gaussian_window(params.window, params.sigma);
  const double c1 = (params.k1 * params.dynamic_range) * (params.k1 * params.dynamic_range);
  const double c2 = (params.k2 * params.dynamic_range) * (params.k2 * params.dynamic_range);
  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    const std::size_t n = detail::pixel_count(w, h);
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t p = 0; p < n; ++p) {
      x[p] = ref.values()[p * nc + c];
      y[p] = pred.values()[p * nc + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = detail::filter_valid(x, w, h, g), my = detail::filter_valid(y, w, h, g);
    const auto exx = detail::filter_valid(xx, w, h, g), eyy = detail::filter_valid(yy, w, h, g);
    const auto exy = detail::filter_valid(xy, w, h, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = exx[i] - mx[i] * mx[i];
      const double vy = eyy[i] - my[i] * my[i];
      const double cov = exy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / mx.size();
  }
  return total / nc;
}

}  // namespace mpiview
