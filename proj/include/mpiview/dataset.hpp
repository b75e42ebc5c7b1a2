// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/io.hpp>
#include <mpiview/pipeline.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mpiview {

struct Resolution {
  int width = 384;
  int height = 288;
  friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Parses "WxH".
inline Resolution parse_resolution(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw InputError("");
    std::size_t used = 0;
    const int w = std::stoi(text.substr(0, x), &used);
    if (used != x) throw InputError("");
    const std::string rest = text.substr(x + 1);
    const int h = std::stoi(rest, &used);
    if (used != rest.size() || w < 1 || h < 1) throw InputError("");
    return {w, h};
  } catch (const std::exception&) {
    throw InputError("resolution must look like 384x288, got '" + text + "'");
  }
}

struct SampleRecord {
  fs::path image;
  fs::path depth;
  std::optional<CameraPose> pose;
};

struct IngestOptions {
  Resolution resolution;
  std::optional<fs::path> manifest;  // JSON {"samples": [{"image", "depth", "pose"?}]}
};

struct IngestResult {
  std::vector<SampleRecord> records;
  std::vector<std::string> warnings;
};

/// Loads a record at working resolution: resize-then-center-crop, depth
/// normalized onto the schedule.
inline Sample load_sample(const SampleRecord& rec, const Resolution& res, const PlaneDepthSchedule& schedule) {
  Image img = load_rgb(rec.image);
  DepthMap depth = load_depth(rec.depth);
  const double ai = static_cast<double>(img.width()) / img.height();
  const double ad = static_cast<double>(depth.width()) / depth.height();
  if (std::abs(ai - ad) > 0.01 * ai)
    throw InputError(rec.depth.string() + ": depth shape " + std::to_string(depth.width()) + "x" +
                     std::to_string(depth.height()) + " does not match image " + rec.image.string() + " (" +
                     std::to_string(img.width()) + "x" + std::to_string(img.height()) + ")");
  img = resize_center_crop(img, res.width, res.height);
  depth = resize_center_crop(depth, res.width, res.height);
  return {rec.image.stem().string(), std::move(img), normalize_disparity(depth, schedule), rec.pose};
}

namespace detail {

inline std::optional<fs::path> depth_for(const fs::path& image) {
  const fs::path dir = image.parent_path();
  const std::string stem = image.stem().string();
  for (const char* ext : {".depth.png", ".depth.pfm"}) {
    const fs::path cand = dir / (stem + ext);
    if (fs::exists(cand)) return cand;
  }
  return std::nullopt;
}

inline bool is_depth_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.find(".depth.") != std::string::npos;
}

}  // namespace detail

/// Collects `name.png` + `name.depth.png|.pfm` pairs (sorted by file name) or
/// the samples of a manifest, and validates that each pair loads.
inline IngestResult ingest_dataset(const fs::path& root, const IngestOptions& opts = {},
                                   const PlaneDepthSchedule& schedule = {}) {
  IngestResult out;
  if (opts.manifest) {
    const json m = read_json(*opts.manifest);
    if (!m.contains("samples") || !m.at("samples").is_array())
      throw InputError(opts.manifest->string() + ": missing array field 'samples'");
    const fs::path base = opts.manifest->parent_path();
    for (const json& s : m.at("samples")) {
      if (!s.contains("image") || !s.contains("depth"))
        throw InputError(opts.manifest->string() + ": sample entries need 'image' and 'depth'");
      SampleRecord rec{base / s.at("image").get<std::string>(), base / s.at("depth").get<std::string>(), std::nullopt};
      if (s.contains("pose")) rec.pose = pose_from_json(s.at("pose"));
      out.records.push_back(std::move(rec));
    }
  } else {
    if (!fs::is_directory(root)) throw InputError(root.string() + ": not a directory");
    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_regular_file() && e.path().extension() == ".png" && !detail::is_depth_file(e.path()))
        images.push_back(e.path());
    std::sort(images.begin(), images.end());
    for (const auto& img : images) {
      const auto depth = detail::depth_for(img);
      if (!depth) throw InputError(img.string() + ": no matching .depth.png or .depth.pfm");
      out.records.push_back({img, *depth, std::nullopt});
    }
    if (images.empty()) out.warnings.push_back(root.string() + ": no image/depth pairs found");
  }
  for (const auto& rec : out.records) {
    if (!fs::exists(rec.image)) throw InputError(rec.image.string() + ": missing image file");
    if (!fs::exists(rec.depth)) throw InputError(rec.depth.string() + ": missing depth file");
    (void)load_sample(rec, opts.resolution, schedule);
  }
  return out;
}

/// Writes the MPI directory plus `poses.json` with the camera limits a viewer
/// should clamp to.
inline void export_viewer_bundle(const Mpi& mpi, const fs::path& dir, const PoseSamplerConfig& limits = {}) {
  save_mpi(mpi, dir);
  const json poses{{"format_version", kMpiFormatVersion},
                   {"convention", "source_to_target"},
                   {"translation_limit", {limits.max_translation, limits.max_translation, limits.max_translation}},
                   {"rotation_limit_deg", {limits.max_rotation_deg, limits.max_rotation_deg, limits.max_rotation_deg}},
                   {"default_pose", pose_to_json(CameraPose::identity())}};
  write_text(dir / "poses.json", poses.dump(2) + "\n");
}

}  // namespace mpiview
