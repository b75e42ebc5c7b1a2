// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

#pragma once

#include <mpiview/core.hpp>
#include <mpiview/mpi.hpp>
#include <mpiview/losses.hpp>

#include <png.h>
#include <zlib.h>

#include <json.hpp>

#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace mpiview {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Writes through a sibling temporary file, then renames over `path`.
inline void atomic_write(const fs::path& path, const std::function<void(const fs::path&)>& writer) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    writer(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  atomic_write(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw InputError("failed writing " + tmp.string());
  });
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
}

/// Raw decoded PNG samples, normalized to [0,1].
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<double> values;
};

inline PngImage read_png(const fs::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw InputError(path.string() + ": cannot read PNG: " + img.message);
  const bool sixteen = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  // 16-bit linear output with alpha would be premultiplied; drop alpha there.
  img.format = (sixteen ? PNG_FORMAT_FLAG_LINEAR : 0) | (color ? PNG_FORMAT_FLAG_COLOR : 0) |
               (!sixteen && alpha ? PNG_FORMAT_FLAG_ALPHA : 0);
  PngImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = static_cast<int>(PNG_IMAGE_SAMPLE_CHANNELS(img.format));
  out.bit_depth = sixteen ? 16 : 8;
  const std::size_t count = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.values.resize(count);
  if (sixteen) {
    std::vector<png_uint_16> buf(count);
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
      throw InputError(path.string() + ": PNG decode failed: " + img.message);
    for (std::size_t i = 0; i < count; ++i) out.values[i] = buf[i] / 65535.0;
  } else {
    std::vector<png_byte> buf(count);
    if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr))
      throw InputError(path.string() + ": PNG decode failed: " + img.message);
    for (std::size_t i = 0; i < count; ++i) out.values[i] = buf[i] / 255.0;
  }
  png_image_free(&img);
  return out;
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }
inline std::uint16_t to_word(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}


namespace detail {

// Only trivially destructible locals live here so libpng's longjmp is safe.
inline bool png_encode(std::FILE* fp, png_uint_32 width, png_uint_32 height, int color_type, int bit_depth,
                       const png_byte* data, std::size_t row_bytes) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  // Fast settings: MPI planes are large and mostly runs of zero alpha.
  png_set_compression_level(png, 1);
  png_set_compression_strategy(png, Z_RLE);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (bit_depth == 16) png_set_gAMA_fixed(png, info, PNG_GAMMA_LINEAR);
  png_write_info(png, info);
  for (png_uint_32 y = 0; y < height; ++y) png_write_row(png, data + y * row_bytes);
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return true;
}

inline void write_png_bytes(const fs::path& path, int width, int height, int color_type, int bit_depth,
                            const std::vector<png_byte>& data, std::size_t row_bytes) {
  atomic_write(path, [&](const fs::path& tmp) {
    std::FILE* fp = std::fopen(tmp.string().c_str(), "wb");
    if (!fp) throw InputError(tmp.string() + ": cannot open for writing");
    const bool ok = png_encode(fp, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), color_type,
                               bit_depth, data.data(), row_bytes);
    if (std::fclose(fp) != 0 || !ok) throw InputError(path.string() + ": PNG write failed");
  });
}

inline int png_color_type_for(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGB_ALPHA;
    default: throw InputError("unsupported PNG channel count");
  }
}

}  // namespace detail

/// 8-bit PNG from interleaved [0,1] samples.
inline void write_png(const fs::path& path, int width, int height, int channels, std::span<const double> values) {
  const int type = detail::png_color_type_for(channels);
  std::vector<png_byte> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) buf[i] = to_byte(values[i]);
  detail::write_png_bytes(path, width, height, type, 8, buf, static_cast<std::size_t>(width) * channels);
}

inline void write_png(const fs::path& path, const Image& img) {
  write_png(path, img.width(), img.height(), img.channels(), img.values());
}

inline void write_png(const fs::path& path, const BinaryMask& mask) {
  std::vector<double> v(mask.values().begin(), mask.values().end());
  write_png(path, mask.width(), mask.height(), 1, v);
}

/// 16-bit grayscale PNG from [0,1] samples.
inline void write_png16(const fs::path& path, int width, int height, std::span<const double> values) {
  std::vector<png_byte> buf(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint16_t w = to_word(values[i]);
    buf[2 * i] = static_cast<png_byte>(w >> 8);
    buf[2 * i + 1] = static_cast<png_byte>(w & 0xff);
  }
  detail::write_png_bytes(path, width, height, PNG_COLOR_TYPE_GRAY, 16, buf, static_cast<std::size_t>(width) * 2);
}

/// Loads a PNG as an image with the file's channel count (16-bit files
/// drop alpha).
inline Image load_image(const fs::path& path) {
  PngImage png = read_png(path);
  return {png.width, png.height, png.channels, std::move(png.values)};
}

/// Loads a PNG as 3-channel RGB: gray is replicated, alpha dropped.
inline Image load_rgb(const fs::path& path) {
  const PngImage png = read_png(path);
  const int color_channels = (png.channels >= 3) ? 3 : 1;
  std::vector<double> out(static_cast<std::size_t>(png.width) * png.height * 3);
  for (std::size_t p = 0; p < out.size() / 3; ++p)
    for (int c = 0; c < 3; ++c) out[p * 3 + c] = png.values[p * png.channels + (color_channels == 3 ? c : 0)];
  return {png.width, png.height, 3, std::move(out)};
}

/// Single-channel little-endian PFM; rows are stored bottom to top.
inline void save_pfm(const fs::path& path, const DepthMap& depth) {
  atomic_write(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot open " + tmp.string());
    out << "Pf\n" << depth.width() << " " << depth.height() << "\n-1.0\n";
    for (int y = depth.height() - 1; y >= 0; --y)
      for (int x = 0; x < depth.width(); ++x) {
        const float v = static_cast<float>(depth.at(x, y));
        std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
      }
    if (!out) throw InputError("failed writing " + tmp.string());
  });
}

inline DepthMap load_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (!in || (magic != "Pf" && magic != "PF") || w <= 0 || h <= 0 || scale == 0.0)
    throw InputError(path.string() + ": malformed PFM header");
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  std::vector<double> values(static_cast<std::size_t>(w) * h);
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), sizeof bits);
        if (!in) throw InputError(path.string() + ": truncated PFM data");
        if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
        const float v = std::bit_cast<float>(bits);
        if (!std::isfinite(v)) throw NumericError(path.string() + ": PFM contains non-finite values");
        if (c == 0) values[static_cast<std::size_t>(y) * w + x] = v;
      }
  return {w, h, std::move(values)};
}

/// Disparity range attached to an integer depth image (sidecar `<file>.json`).
struct DepthRange {
  double min = 0.0;
  double max = 1.0;
};

inline fs::path depth_sidecar(const fs::path& path) {
  fs::path side = path;
  side += ".json";
  return side;
}

/// Loads disparity from .pfm, or from an 8/16-bit PNG mapped linearly onto
/// the sidecar range (default [0,1]).
inline DepthMap load_depth(const fs::path& path) {
  if (path.extension() == ".pfm") return load_pfm(path);
  const PngImage png = read_png(path);
  DepthRange range;
  if (fs::exists(depth_sidecar(path))) {
    const json meta = read_json(depth_sidecar(path));
    try {
      range.min = meta.at("disparity_min").get<double>();
      range.max = meta.at("disparity_max").get<double>();
    } catch (const json::exception& e) {
      throw InputError(depth_sidecar(path).string() + ": " + e.what());
    }
  }
  std::vector<double> out(static_cast<std::size_t>(png.width) * png.height);
  for (std::size_t p = 0; p < out.size(); ++p)
    out[p] = range.min + png.values[p * png.channels] * (range.max - range.min);
  return {png.width, png.height, std::move(out)};
}

inline void save_depth_png16(const fs::path& path, const DepthMap& depth, DepthRange range) {
  if (!(range.max > range.min)) throw InputError("depth range must be non-empty");
  std::vector<double> v(depth.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (depth.values()[i] - range.min) / (range.max - range.min);
  write_png16(path, depth.width(), depth.height(), v);
  write_text(depth_sidecar(path), json{{"disparity_min", range.min}, {"disparity_max", range.max}}.dump(2) + "\n");
}

inline void save_depth(const fs::path& path, const DepthMap& depth, DepthRange range) {
  if (path.extension() == ".pfm") {
    save_pfm(path, depth);
  } else {
    save_depth_png16(path, depth, range);
  }
}

// ---- MPI directory ----

inline constexpr int kMpiFormatVersion = 1;

inline std::string plane_filename(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "plane_%03d.png", i);
  return buf;
}

inline json mpi_metadata(const Mpi& mpi) {
  const Intrinsics& k = mpi.intrinsics();
  return json{{"format_version", kMpiFormatVersion},
              {"width", mpi.width()},
              {"height", mpi.height()},
              {"num_planes", mpi.size()},
              {"disparities", std::vector<double>(mpi.disparities().begin(), mpi.disparities().end())},
              {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}}};
}

/// Writes `mpi.json` and one RGBA plane PNG per plane, far to near.
inline void save_mpi(const Mpi& mpi, const fs::path& dir) {
  fs::create_directories(dir);
  for (int i = 0; i < mpi.size(); ++i) {
    const auto c = mpi.color(i).values(), a = mpi.alpha(i).values();
    std::vector<double> rgba(a.size() * 4);
    for (std::size_t p = 0; p < a.size(); ++p) {
      for (int ch = 0; ch < 3; ++ch) rgba[p * 4 + ch] = c[p * 3 + ch];
      rgba[p * 4 + 3] = a[p];
    }
    write_png(dir / plane_filename(i), mpi.width(), mpi.height(), 4, rgba);
  }
  write_text(dir / "mpi.json", mpi_metadata(mpi).dump(2) + "\n");
}

inline Mpi load_mpi(const fs::path& dir) {
  const fs::path meta_path = dir / "mpi.json";
  if (!fs::exists(meta_path)) throw InputError(meta_path.string() + ": missing MPI metadata");
  const json meta = read_json(meta_path);
  auto field = [&](const char* name) -> const json& {
    if (!meta.contains(name)) throw InputError(meta_path.string() + ": missing field '" + name + "'");
    return meta.at(name);
  };
  try {
    const int version = field("format_version").get<int>();
    if (version != kMpiFormatVersion)
      throw InputError(meta_path.string() + ": unsupported format_version " + std::to_string(version));
    const int width = field("width").get<int>();
    const int height = field("height").get<int>();
    const int planes = field("num_planes").get<int>();
    const auto disparities = field("disparities").get<std::vector<double>>();
    if (static_cast<int>(disparities.size()) != planes)
      throw InputError(meta_path.string() + ": field 'disparities' has " + std::to_string(disparities.size()) +
                       " entries, num_planes is " + std::to_string(planes));
    const json& k = field("intrinsics");
    const Intrinsics intr{k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                          k.at("cy").get<double>()};
    std::vector<Image> colors, alphas;
    for (int i = 0; i < planes; ++i) {
      const fs::path plane = dir / plane_filename(i);
      if (!fs::exists(plane)) throw InputError(plane.string() + ": missing plane file");
      const PngImage png = read_png(plane);
      if (png.width != width || png.height != height || png.channels != 4)
        throw InputError(plane.string() + ": expected " + std::to_string(width) + "x" + std::to_string(height) +
                         " RGBA plane");
      std::vector<double> c(static_cast<std::size_t>(width) * height * 3), a(static_cast<std::size_t>(width) * height);
      for (std::size_t p = 0; p < a.size(); ++p) {
        for (int ch = 0; ch < 3; ++ch) c[p * 3 + ch] = png.values[p * 4 + ch];
        a[p] = png.values[p * 4 + 3];
      }
      colors.emplace_back(width, height, 3, std::move(c));
      if (i > 0) alphas.emplace_back(width, height, 1, std::move(a));
    }
    return {intr, disparities, std::move(colors), std::move(alphas)};
  } catch (const json::exception& e) {
    throw InputError(meta_path.string() + ": " + e.what());
  }
}

// ---- poses ----

inline json pose_to_json(const CameraPose& pose) {
  std::vector<double> r(9), t(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i * 3 + j] = pose.rotation()(i, j);
    t[i] = pose.translation()(i);
  }
  return json{{"rotation", r}, {"translation", t}};
}

/// Accepts {rotation: 9 row-major, translation: 3} or the shorthand
/// {rx, ry, rz (rotation vector, degrees), tx, ty, tz}.
inline CameraPose pose_from_json(const json& j) {
  try {
    if (j.contains("rotation") || j.contains("translation")) {
      const auto r = j.at("rotation").get<std::vector<double>>();
      const auto t = j.at("translation").get<std::vector<double>>();
      if (r.size() != 9 || t.size() != 3) throw InputError("pose: rotation needs 9 values, translation 3");
      Eigen::Matrix3d rot;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) rot(i, k) = r[i * 3 + k];
      return {rot, Eigen::Vector3d(t[0], t[1], t[2])};
    }
    auto get = [&](const char* key) { return j.contains(key) ? j.at(key).get<double>() : 0.0; };
    return CameraPose::from_axis_angle_degrees({get("rx"), get("ry"), get("rz")}, {get("tx"), get("ty"), get("tz")});
  } catch (const json::exception& e) {
    throw InputError(std::string("pose: ") + e.what());
  }
}

inline CameraPose load_pose(const fs::path& path) { return pose_from_json(read_json(path)); }

inline json loss_report_json(const LossReport& r) {
  return json{{"depth", r.depth}, {"pix", r.pix}, {"vgg", r.vgg}, {"style", r.style}, {"total", r.total}};
}

}  // namespace mpiview
