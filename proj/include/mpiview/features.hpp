// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/losses.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace mpiview {

/// Any callable mapping an image to a list of feature levels.
using FeatureExtractor = std::function<std::vector<FeatureMap>(const Image&)>;

/// Uniform double in [0,1) from the top 53 bits of a 64-bit Mersenne draw.
/// Unlike std::uniform_real_distribution the mapping is the same on every
/// standard library.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Three levels of fixed random 3x3 convolutions with ReLU and 2x2 pooling
/// between levels. For exercising the feature and style losses in tests; its
/// activations carry no perceptual meaning.
class ToyFeatureExtractor {
 public:
  explicit ToyFeatureExtractor(std::uint64_t seed = 7, std::vector<int> widths = {8, 16, 32})
      : seed_(seed), widths_(std::move(widths)) {}

  std::vector<FeatureMap> operator()(const Image& img) const {
    std::mt19937_64 rng(seed_ ^ (static_cast<std::uint64_t>(img.channels()) << 32));
    std::vector<double> data(img.values().size());
    const int w = img.width(), h = img.height(), nc = img.channels();
    for (int c = 0; c < nc; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          data[(static_cast<std::size_t>(c) * h + y) * w + x] = img.at(x, y, c);
    FeatureMap current(nc, h, w, std::move(data));
    std::vector<FeatureMap> levels;
    for (std::size_t l = 0; l < widths_.size(); ++l) {
      if (l > 0) current = pool(current);
      current = conv_relu(current, widths_[l], rng);
      levels.push_back(current);
    }
    return levels;
  }

 private:
  static FeatureMap pool(const FeatureMap& f) {
    const int w = std::max(1, f.width / 2), h = std::max(1, f.height / 2);
    std::vector<double> out(static_cast<std::size_t>(f.channels) * w * h);
    for (int c = 0; c < f.channels; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = 0.0;
          int n = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int sx = 2 * x + dx, sy = 2 * y + dy;
              if (sx < f.width && sy < f.height) {
                s += f.at(c, sy, sx);
                ++n;
              }
            }
          out[(static_cast<std::size_t>(c) * h + y) * w + x] = s / n;
        }
    return {f.channels, h, w, std::move(out)};
  }

  static FeatureMap conv_relu(const FeatureMap& f, int out_channels, std::mt19937_64& rng) {
    const int cin = f.channels, w = f.width, h = f.height;
    const double scale = 1.0 / std::sqrt(9.0 * cin);
    std::vector<double> weights(static_cast<std::size_t>(out_channels) * cin * 9);
    for (double& v : weights) v = (2.0 * unit_uniform(rng) - 1.0) * scale;
    std::vector<double> bias(out_channels);
    for (double& v : bias) v = (2.0 * unit_uniform(rng) - 1.0) * 0.1;
    std::vector<double> out(static_cast<std::size_t>(out_channels) * w * h);
    for (int o = 0; o < out_channels; ++o)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = bias[o];
          for (int c = 0; c < cin; ++c)
            for (int ky = -1; ky <= 1; ++ky)
              for (int kx = -1; kx <= 1; ++kx) {
                const int sx = x + kx, sy = y + ky;
                if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
                s += weights[((static_cast<std::size_t>(o) * cin + c) * 3 + (ky + 1)) * 3 + (kx + 1)] * f.at(c, sy, sx);
              }
          out[(static_cast<std::size_t>(o) * h + y) * w + x] = std::max(0.0, s);
        }
    return {out_channels, h, w, std::move(out)};
  }

  std::uint64_t seed_;
  std::vector<int> widths_;
};

}  // namespace mpiview
