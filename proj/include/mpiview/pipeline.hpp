// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/features.hpp>
#include <mpiview/image_ops.hpp>
#include <mpiview/losses.hpp>
#include <mpiview/mpi.hpp>
#include <mpiview/selfsup.hpp>
#include <mpiview/warp.hpp>

#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>

namespace mpiview {

struct PoseSamplerConfig {
  double max_translation = 0.05;  // per axis, scene units
  double max_rotation_deg = 2.0;  // per axis
  std::uint64_t seed = 0;

  void validate() const {
    if (!(max_translation >= 0.0) || !(max_rotation_deg >= 0.0)) throw InputError("pose bounds must be non-negative");
  }
};

/// Draws small random target poses; the source camera is the identity.
class PoseSampler {
 public:
  explicit PoseSampler(const PoseSamplerConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

  CameraPose next() {
    auto sym = [this](double bound) { return (2.0 * unit_uniform(rng_) - 1.0) * bound; };
    const Eigen::Vector3d t(sym(cfg_.max_translation), sym(cfg_.max_translation), sym(cfg_.max_translation));
    const double deg = M_PI / 180.0;
    const double ax = sym(cfg_.max_rotation_deg) * deg;
    const double ay = sym(cfg_.max_rotation_deg) * deg;
    const double az = sym(cfg_.max_rotation_deg) * deg;
    if (ax == 0.0 && ay == 0.0 && az == 0.0 && t.isZero(0.0)) return CameraPose::identity();
    const Eigen::Matrix3d r = (Eigen::AngleAxisd(az, Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(ay, Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(ax, Eigen::Vector3d::UnitX()))
                                  .toRotationMatrix();
    return {r, t};
  }

 private:
  PoseSamplerConfig cfg_;
  std::mt19937_64 rng_;
};

inline CameraPose sample_pose(const PoseSamplerConfig& cfg) { return PoseSampler(cfg).next(); }

enum class ProjectionMode { direct, inverse };

/// Picks direct or inverse projection with equal probability.
inline ProjectionMode choose_projection_mode(std::mt19937_64& rng) {
  return (rng() >> 63) ? ProjectionMode::inverse : ProjectionMode::direct;
}

/// Produces an MPI from an image; the depth argument is a hint that learned
/// producers are free to ignore.
template <typename P>
concept MpiProducer = requires(const P& p, const Image& img, const DepthMap& depth) {
  { p(img, depth) } -> std::convertible_to<Mpi>;
};

/// Depth-slicing producer (see oracle_mpi); background is the flipped input.
struct OracleProducer {
  PlaneDepthSchedule schedule;
  Mpi operator()(const Image& img, const DepthMap& depth) const { return oracle_mpi(img, depth, schedule); }
};

/// An image with its disparity, already normalized to the plane schedule.
struct Sample {
  std::string name;
  Image image;
  DepthMap depth;
  std::optional<CameraPose> pose;
};

struct PassConfig {
  PlaneDepthSchedule schedule;
  MorphologyConfig image_morph = MorphologyConfig::image_defaults();
  MorphologyConfig depth_morph = MorphologyConfig::depth_defaults();
  LossConfig loss;
  HoleFill hole_fill = HoleFill::flipped;
  bool masked_loss = false;               // restrict image losses to valid pixels
  const FeatureExtractor* features = nullptr;  // optional; feature and style terms are 0 without it
};

/// Inputs and outputs of one projection pass.
struct PassBundle {
  Image input;                // image fed to the producer
  DepthMap input_depth;       // depth hint fed to the producer
  CameraPose render_pose;     // pose the producer's MPI was rendered at
  Image reference;            // image supervision
  BinaryMask reference_valid; // valid pixels of the image supervision
  DepthMap depth_reference;   // depth supervision
  Image rendered;
  BinaryMask coverage;
  DepthMap regressed_depth;   // disparity regressed from the producer's MPI
  LossReport losses;
};

namespace detail {

inline LossReport image_and_depth_losses(const Image& ref, const Image& pred, const BinaryMask& valid,
                                         const DepthMap& depth_ref, const DepthMap& depth_pred,
                                         const PassConfig& cfg) {
  LossReport parts;
  const BinaryMask* mask = cfg.masked_loss ? &valid : nullptr;
  parts.depth = depth_loss(depth_ref, depth_pred, cfg.loss);
  parts.pix = pixel_loss(ref, pred, mask);
  if (cfg.features && *cfg.features) {
    const auto fr = (*cfg.features)(ref);
    const auto fp = (*cfg.features)(pred);
    parts.vgg = feature_loss(fr, fp);
    parts.style = style_loss(fr, fp);
  }
  return total_loss(parts, cfg.loss);
}

template <MpiProducer Producer>
PassBundle render_back(Image input, DepthMap input_depth, const CameraPose& pose, const Producer& producer,
                       const Sample& sample, const DepthWarp& depth_target, const PassConfig& cfg) {
  const Mpi mpi = producer(input, input_depth);
  const CameraPose back = pose.inverse();
  RenderResult r = render_view(mpi, back);
  PassBundle b;
  b.input = std::move(input);
  b.input_depth = std::move(input_depth);
  b.render_pose = back;
  b.reference = sample.image;
  b.reference_valid = r.coverage;
  b.depth_reference = depth_target.depth;
  b.rendered = std::move(r.image);
  b.coverage = std::move(r.coverage);
  b.regressed_depth = std::move(r.depth);
  b.losses = image_and_depth_losses(b.reference, b.rendered, b.reference_valid, b.depth_reference,
                                    b.regressed_depth, cfg);
  return b;
}

}  // namespace detail

/// Source image in, render at `pose`, supervised by the reconstructed target
/// view and the source depth.
template <MpiProducer Producer>
PassBundle forward_pass(const Sample& sample, const CameraPose& pose, const Producer& producer, const PassConfig& cfg) {
  require_same_size(sample.image, sample.depth, "forward_pass");
  const Mpi mpi = producer(sample.image, sample.depth);
  RenderResult r = render_view(mpi, pose);
  TargetReconstruction target =
      reconstruct_target(sample.image, sample.depth, pose, cfg.schedule, cfg.image_morph, cfg.hole_fill);
  PassBundle b;
  b.input = sample.image;
  b.input_depth = sample.depth;
  b.render_pose = pose;
  b.reference = std::move(target.image);
  b.reference_valid = std::move(target.valid);
  b.depth_reference = sample.depth;
  b.rendered = std::move(r.image);
  b.coverage = std::move(r.coverage);
  b.regressed_depth = std::move(r.depth);
  b.losses = detail::image_and_depth_losses(b.reference, b.rendered, b.reference_valid, b.depth_reference,
                                            b.regressed_depth, cfg);
  return b;
}

/// Reconstructed target view in, render back at the source viewpoint,
/// supervised by the source image and the warped source depth.
template <MpiProducer Producer>
PassBundle inverse_pass(const Sample& sample, const CameraPose& pose, const Producer& producer, const PassConfig& cfg) {
  require_same_size(sample.image, sample.depth, "inverse_pass");
  TargetReconstruction target =
      reconstruct_target(sample.image, sample.depth, pose, cfg.schedule, cfg.image_morph, cfg.hole_fill);
  const DepthWarp depth_target = warp_depth(sample.depth, pose, cfg.schedule, cfg.depth_morph, cfg.hole_fill);
  return detail::render_back(std::move(target.image), depth_target.depth, pose, producer, sample, depth_target, cfg);
}

/// Forward pass, then the rendered view is fed back and rendered at the
/// source viewpoint. The backward producer's depth hint is the forward
/// regressed disparity warped to the target view.
template <MpiProducer Producer>
std::pair<PassBundle, PassBundle> cyclic_pass(const Sample& sample, const CameraPose& pose, const Producer& producer,
                                              const PassConfig& cfg) {
  PassBundle forward = forward_pass(sample, pose, producer, cfg);
  const DepthWarp depth_target = warp_depth(sample.depth, pose, cfg.schedule, cfg.depth_morph, cfg.hole_fill);
  DepthWarp hint = warp_depth(forward.regressed_depth, pose, cfg.schedule, cfg.depth_morph, cfg.hole_fill);
  PassBundle backward =
      detail::render_back(forward.rendered, std::move(hint.depth), pose, producer, sample, depth_target, cfg);
  return {std::move(forward), std::move(backward)};
}

}  // namespace mpiview
