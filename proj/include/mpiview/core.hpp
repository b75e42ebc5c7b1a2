// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mpiview {

/// Malformed or inconsistent input (bad shapes, unreadable files, bad config).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced or was fed a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Read-only window over an interleaved row-major pixel buffer.
struct PixelView {
  std::span<const double> data;
  int width = 0;
  int height = 0;
  int channels = 1;

  [[nodiscard]] double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  [[nodiscard]] bool empty() const { return width == 0 || height == 0; }
};

namespace detail {

inline void check_dims(int width, int height, int channels) {
  if (width < 0 || height < 0) throw InputError("negative image dimension");
  if (channels < 1 || channels > 4) throw InputError("channel count must be 1..4, got " + std::to_string(channels));
}

inline std::size_t pixel_count(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace detail

/// H x W x C intensity buffer. Every stored value is finite and lies in [0,1];
/// writes clamp, non-finite writes throw.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    detail::check_dims(width, height, channels);
    data_.assign(detail::pixel_count(width, height) * channels, clamp_value(fill));
  }
  Image(int width, int height, int channels, std::vector<double> values)
      : width_(width), height_(height), channels_(channels), data_(std::move(values)) {
    detail::check_dims(width, height, channels);
    if (data_.size() != detail::pixel_count(width, height) * channels)
      throw InputError("image buffer length does not match width*height*channels");
    for (double& v : data_) v = clamp_value(v);
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  [[nodiscard]] double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
  void set(int x, int y, int c, double v) { data_[index(x, y, c)] = clamp_value(v); }

  [[nodiscard]] std::span<const double> values() const { return data_; }
  [[nodiscard]] PixelView view() const { return {data_, width_, height_, channels_}; }
  [[nodiscard]] bool same_size(int width, int height) const { return width_ == width && height_ == height; }
  template <typename Other>
  [[nodiscard]] bool same_size(const Other& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

  static double clamp_value(double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite image intensity");
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

/// H x W disparity (inverse depth) buffer; values finite and non-negative.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    detail::check_dims(width, height, 1);
    data_.assign(detail::pixel_count(width, height), checked(fill));
  }
  DepthMap(int width, int height, std::vector<double> values)
      : width_(width), height_(height), data_(std::move(values)) {
    detail::check_dims(width, height, 1);
    if (data_.size() != detail::pixel_count(width, height))
      throw InputError("depth buffer length does not match width*height");
    for (double v : data_) checked(v);
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int channels() const { return 1; }
  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
  [[nodiscard]] double at(int x, int y) const { return data_[index(x, y)]; }
  void set(int x, int y, double v) { data_[index(x, y)] = checked(v); }

  [[nodiscard]] std::span<const double> values() const { return data_; }
  [[nodiscard]] PixelView view() const { return {data_, width_, height_, 1}; }
  template <typename Other>
  [[nodiscard]] bool same_size(const Other& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

  static double checked(double v) {
    if (!std::isfinite(v)) throw NumericError("non-finite disparity value");
    if (v < 0.0) throw InputError("negative disparity value");
    return v;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// H x W mask with values strictly in {0,1}.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false) : width_(width), height_(height) {
    detail::check_dims(width, height, 1);
    data_.assign(detail::pixel_count(width, height), fill ? 1 : 0);
  }
  BinaryMask(int width, int height, std::vector<std::uint8_t> values)
      : width_(width), height_(height), data_(std::move(values)) {
    detail::check_dims(width, height, 1);
    if (data_.size() != detail::pixel_count(width, height))
      throw InputError("mask buffer length does not match width*height");
    for (auto v : data_)
      if (v > 1) throw InputError("mask values must be 0 or 1");
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
  [[nodiscard]] bool at(int x, int y) const { return data_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { data_[index(x, y)] = v ? 1 : 0; }
  [[nodiscard]] std::span<const std::uint8_t> values() const { return data_; }
  [[nodiscard]] std::size_t count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
  }
  template <typename Other>
  [[nodiscard]] bool same_size(const Other& o) const {
    return width_ == o.width() && height_ == o.height();
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Pinhole intrinsics in pixel units.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// fx = fy = max(W,H), principal point at the pixel-grid center.
  static Intrinsics standard(int width, int height) {
    const double f = static_cast<double>(std::max(width, height));
    return {f, f, (width - 1) / 2.0, (height - 1) / 2.0};
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
      throw InputError("intrinsics focal lengths must be positive and finite");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw InputError("intrinsics principal point must be finite");
  }

  [[nodiscard]] Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
  [[nodiscard]] Eigen::Matrix3d inverse_matrix() const {
    Eigen::Matrix3d k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
  }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Rigid transform taking source-camera coordinates to target-camera
/// coordinates: X_t = R X_s + t. Translation is in units where disparity 1
/// corresponds to depth 1.
class CameraPose {
 public:
  CameraPose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  CameraPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation_.allFinite() || !translation_.allFinite()) throw InputError("pose contains non-finite values");
    const double ortho_err = (rotation_ * rotation_.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho_err > 1e-6 || std::abs(rotation_.determinant() - 1.0) > 1e-6)
      throw InputError("pose rotation is not a proper orthonormal matrix");
  }

  static CameraPose identity() { return {}; }

  /// Rotation vector (axis * angle) in degrees plus translation.
  static CameraPose from_axis_angle_degrees(const Eigen::Vector3d& rotation_deg, const Eigen::Vector3d& translation) {
    const Eigen::Vector3d r = rotation_deg * (M_PI / 180.0);
    const double angle = r.norm();
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    if (angle > 0.0) rot = Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
    return {rot, translation};
  }

  [[nodiscard]] const Eigen::Matrix3d& rotation() const { return rotation_; }
  [[nodiscard]] const Eigen::Vector3d& translation() const { return translation_; }

  /// (R^T, -R^T t): maps target-camera coordinates back to the source camera.
  [[nodiscard]] CameraPose inverse() const {
    const Eigen::Matrix3d rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

  /// this ∘ first: apply `first`, then this pose.
  [[nodiscard]] CameraPose after(const CameraPose& first) const {
    return {rotation_ * first.rotation_, rotation_ * first.translation_ + translation_};
  }

  [[nodiscard]] bool is_identity() const {
    return rotation_ == Eigen::Matrix3d::Identity() && translation_ == Eigen::Vector3d::Zero();
  }

  friend bool operator==(const CameraPose& a, const CameraPose& b) {
    return a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

template <typename A, typename B>
void require_same_size(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InputError(std::string(what) + ": size mismatch (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
}

}  // namespace mpiview
