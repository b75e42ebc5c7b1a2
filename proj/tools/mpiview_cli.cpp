// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the mpiview project.

// mpiview: build, render and supervise multiplane images from the command line.

#include <mpiview/mpiview.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

using namespace mpiview;

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

/// Config files may be TOML (CLI11's native format) or a flat/nested JSON
/// object whose nested objects name subcommands.
class JsonOrTomlConfig : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream again(text);
      return CLI::ConfigTOML::from_config(again);
    }
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("invalid JSON config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (it->is_object()) {
        auto p = parents;
        p.push_back(it.key());
        // CLI11 expects a section marker before a subcommand's items.
        out.push_back(CLI::ConfigItem{p, "++", {}});
        flatten(*it, p, out);
        out.push_back(CLI::ConfigItem{p, "--", {}});
        continue;
      }
      CLI::ConfigItem item{parents, it.key(), {}};
      if (it->is_array()) {
        for (const auto& v : *it) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(*it));
      }
      out.push_back(std::move(item));
    }
  }
};

struct GlobalOptions {
  int planes = 32;
  double sigma_min = 0.01;
  double sigma_max = 1.0;
  std::uint64_t seed = 0;
  std::string resolution;
  int erode = 3;
  int dilate = 7;
  int depth_erode = 3;
  int depth_dilate = 5;
  double beta = 0.01;
  double gamma = 0.0001;
  double alpha_grad = 0.5;
  double max_translation = 0.05;
  double max_rotation = 2.0;
  int threads = 0;
  bool raw_disparity = false;
  bool scale_filters = true;

  CLI::Option* erode_opt = nullptr;
  CLI::Option* dilate_opt = nullptr;
  CLI::Option* depth_erode_opt = nullptr;
  CLI::Option* depth_dilate_opt = nullptr;

  [[nodiscard]] PlaneDepthSchedule schedule() const {
    PlaneDepthSchedule s{planes, sigma_min, sigma_max};
    s.validate();
    return s;
  }

  [[nodiscard]] LossConfig loss() const {
    LossConfig c{alpha_grad, 4, beta, gamma};
    c.validate();
    return c;
  }

  [[nodiscard]] PoseSamplerConfig sampler() const { return {max_translation, max_rotation, seed}; }

  /// Default filter sizes follow the image width; explicit flags win.
  [[nodiscard]] MorphologyConfig image_morph(int width) const {
    return morph(erode, dilate, erode_opt, dilate_opt, width);
  }
  [[nodiscard]] MorphologyConfig depth_morph(int width) const {
    return morph(depth_erode, depth_dilate, depth_erode_opt, depth_dilate_opt, width);
  }

 private:
  [[nodiscard]] MorphologyConfig morph(int e, int d, CLI::Option* eo, CLI::Option* dopt, int width) const {
    MorphologyConfig cfg{e, d};
    cfg.validate();
    if (!scale_filters) return cfg;
    const MorphologyConfig scaled = cfg.scaled_for_width(width);
    return {eo && eo->count() ? e : scaled.erode_size, dopt && dopt->count() ? d : scaled.dilate_size};
  }
};

struct Inputs {
  Image image;
  DepthMap depth;
};

Inputs load_inputs(const GlobalOptions& g, const std::string& image_path, const std::string& depth_path) {
  Image img = load_rgb(image_path);
  DepthMap depth = load_depth(depth_path);
  if (!g.resolution.empty()) {
    const Resolution r = parse_resolution(g.resolution);
    img = resize_center_crop(img, r.width, r.height);
    depth = resize_center_crop(depth, r.width, r.height);
  }
  require_same_size(img, depth, (image_path + " / " + depth_path).c_str());
  if (!g.raw_disparity) depth = normalize_disparity(depth, g.schedule());
  return {std::move(img), std::move(depth)};
}

CameraPose resolve_pose(const GlobalOptions& g, const std::string& pose_arg, bool sample_by_default) {
  if (pose_arg == "identity") return CameraPose::identity();
  if (!pose_arg.empty()) return load_pose(pose_arg);
  if (sample_by_default) return sample_pose(g.sampler());
  return CameraPose::identity();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

DepthRange schedule_range(const PlaneDepthSchedule& s) { return {s.sigma_min, s.sigma_max}; }

Image depth_preview(const DepthMap& depth, const PlaneDepthSchedule& s) {
  std::vector<double> v(depth.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (depth.values()[i] - s.sigma_min) / (s.sigma_max - s.sigma_min);
  return {depth.width(), depth.height(), 1, std::move(v)};
}

void check_finite(const LossReport& r) {
  for (double v : {r.depth, r.pix, r.vgg, r.style, r.total})
    if (!std::isfinite(v)) throw NumericError("loss evaluation produced a non-finite value");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pass_name(int mode) {
  switch (mode) {
    case 0: return "forward";
    case 1: return "inverse";
    default: return "cyclic";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mpiview: multiplane image construction, rendering and self-supervision"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonOrTomlConfig>());
  app.set_config("--config", "", "TOML or JSON file with option values");

  GlobalOptions g;
  app.add_option("--planes", g.planes, "Number of MPI planes")->capture_default_str();
  app.add_option("--sigma-min", g.sigma_min, "Farthest plane disparity")->capture_default_str();
  app.add_option("--sigma-max", g.sigma_max, "Nearest plane disparity")->capture_default_str();
  app.add_option("--seed", g.seed, "Seed for pose sampling")->capture_default_str();
  app.add_option("--resolution", g.resolution, "Working resolution WxH (inputs are resized and center-cropped)");
  g.erode_opt = app.add_option("--erode", g.erode, "Slice erosion size (image)")->capture_default_str();
  g.dilate_opt = app.add_option("--dilate", g.dilate, "Slice dilation size (image)")->capture_default_str();
  g.depth_erode_opt = app.add_option("--depth-erode", g.depth_erode, "Slice erosion size (depth)")->capture_default_str();
  g.depth_dilate_opt =
      app.add_option("--depth-dilate", g.depth_dilate, "Slice dilation size (depth)")->capture_default_str();
  app.add_flag("!--no-filter-scaling", g.scale_filters, "Do not scale default filter sizes with image width");
  app.add_option("--beta", g.beta, "Feature loss weight")->capture_default_str();
  app.add_option("--gamma", g.gamma, "Style loss weight")->capture_default_str();
  app.add_option("--alpha-grad", g.alpha_grad, "Depth gradient term weight")->capture_default_str();
  app.add_option("--max-translation", g.max_translation, "Pose sampler translation bound")->capture_default_str();
  app.add_option("--max-rotation", g.max_rotation, "Pose sampler rotation bound (degrees)")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--raw-disparity", g.raw_disparity, "Use depth values as given instead of normalizing them");
  app.fallthrough();

  // slice
  std::string image_path, depth_path, out_path, background_path;
  auto* slice = app.add_subcommand("slice", "Image + depth -> MPI directory");
  slice->add_option("--image", image_path, "Source image (PNG)")->required();
  slice->add_option("--depth", depth_path, "Disparity map (PNG or PFM)")->required();
  slice->add_option("--background", background_path, "Background image (default: flipped source)");
  slice->add_option("--out", out_path, "Output MPI directory")->required();

  // render
  std::string mpi_path, pose_arg, depth_out, mask_out;
  auto* render = app.add_subcommand("render", "MPI directory + pose -> PNG");
  render->add_option("--mpi", mpi_path, "MPI directory")->required();
  render->add_option("--pose", pose_arg, "Pose JSON file, or 'identity' (default)");
  render->add_option("--out", out_path, "Rendered image (PNG)")->required();
  render->add_option("--depth-out", depth_out, "Regressed disparity (PNG16 or PFM)");
  render->add_option("--mask-out", mask_out, "Coverage mask (PNG)");

  // selfsup
  bool dump_slices = false;
  auto* selfsup = app.add_subcommand("selfsup", "Reconstruct the target view, its valid mask and warped depth");
  selfsup->add_option("--image", image_path, "Source image (PNG)")->required();
  selfsup->add_option("--depth", depth_path, "Disparity map (PNG or PFM)")->required();
  selfsup->add_option("--pose", pose_arg, "Pose JSON file or 'identity' (default: sampled from --seed)");
  selfsup->add_option("--out", out_path, "Output directory")->required();
  selfsup->add_flag("--dump-slices", dump_slices, "Also write every non-empty slice before and after filtering");

  // cycle
  std::string dataset_path, manifest_path, mode_arg = "cyclic", features_arg = "none", dump_dir;
  bool masked_loss = false;
  auto* cycle = app.add_subcommand("cycle", "Run a projection pass and report its losses as JSON");
  cycle->add_option("--image", image_path, "Source image (PNG)");
  cycle->add_option("--depth", depth_path, "Disparity map (PNG or PFM)");
  cycle->add_option("--dataset", dataset_path, "Directory of name.png + name.depth.png|pfm pairs");
  cycle->add_option("--manifest", manifest_path, "JSON manifest of samples");
  cycle->add_option("--pose", pose_arg, "Pose JSON file or 'identity' (default: sampled from --seed)");
  cycle->add_option("--mode", mode_arg, "forward | inverse | cyclic")->check(CLI::IsMember({"forward", "inverse", "cyclic"}));
  cycle->add_option("--features", features_arg, "Feature extractor for vgg/style terms: none | toy")
      ->check(CLI::IsMember({"none", "toy"}));
  cycle->add_flag("--masked-loss", masked_loss, "Restrict image losses to valid pixels");
  cycle->add_option("--dump", dump_dir, "Directory for the rendered images of each pass");
  cycle->add_option("--out", out_path, "Output JSON (default: stdout)");

  // eval
  std::string ref_path, pred_path, csv_path;
  std::optional<int> frame_separation;
  auto* eval = app.add_subcommand("eval", "Image metrics for reference/prediction pairs");
  eval->add_option("--ref", ref_path, "Reference image or directory")->required();
  eval->add_option("--pred", pred_path, "Predicted image or directory")->required();
  eval->add_option("--out", out_path, "Output JSON (default: stdout)");
  eval->add_option("--csv", csv_path, "CSV aggregate output");
  eval->add_option("--frame-separation", frame_separation, "Frame gap between reference and source (metadata only)")
      ->check(CLI::PositiveNumber);

  // export-viewer
  auto* exportv = app.add_subcommand("export-viewer", "Write an MPI bundle for the interactive viewer");
  exportv->add_option("--mpi", mpi_path, "Existing MPI directory");
  exportv->add_option("--image", image_path, "Source image (PNG), with --depth");
  exportv->add_option("--depth", depth_path, "Disparity map (PNG or PFM)");
  exportv->add_option("--out", out_path, "Output bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    set_thread_count(g.threads);
    const PlaneDepthSchedule schedule = g.schedule();

    if (*slice) {
      const Inputs in = load_inputs(g, image_path, depth_path);
      std::optional<Image> bg;
      if (!background_path.empty()) {
        bg = load_rgb(background_path);
        if (!g.resolution.empty()) {
          const Resolution r = parse_resolution(g.resolution);
          bg = resize_center_crop(*bg, r.width, r.height);
        }
      }
      save_mpi(oracle_mpi(in.image, in.depth, schedule, bg), out_path);
    } else if (*render) {
      const Mpi mpi = load_mpi(mpi_path);
      const RenderResult r = render_view(mpi, resolve_pose(g, pose_arg, false));
      write_png(out_path, r.image);
      if (!depth_out.empty())
        save_depth(depth_out, r.depth, {mpi.disparity(0), mpi.disparity(mpi.size() - 1) > mpi.disparity(0)
                                                               ? mpi.disparity(mpi.size() - 1)
                                                               : mpi.disparity(0) + 1.0});
      if (!mask_out.empty()) write_png(mask_out, r.coverage);
    } else if (*selfsup) {
      const Inputs in = load_inputs(g, image_path, depth_path);
      const CameraPose pose = resolve_pose(g, pose_arg, true);
      const MorphologyConfig image_cfg = g.image_morph(in.image.width());
      const MorphologyConfig depth_cfg = g.depth_morph(in.image.width());
      const SelfSupPanels panels = selfsup_panels(in.image, in.depth, pose, schedule, image_cfg);
      const DepthWarp dw = warp_depth(in.depth, pose, schedule, depth_cfg);
      const fs::path dir = out_path;
      write_png(dir / "target.png", panels.filled);
      write_png(dir / "valid.png", panels.valid);
      save_depth_png16(dir / "depth_target.png", dw.depth, schedule_range(schedule));
      write_png(dir / "depth_valid.png", dw.valid);
      write_png(dir / "fig_a_source.png", panels.source);
      write_png(dir / "fig_b_depth.png", depth_preview(panels.depth, schedule));
      write_png(dir / "fig_c_naive.png", panels.naive.image);
      write_png(dir / "fig_d_filtered.png", panels.filtered_image);
      write_png(dir / "fig_e_valid.png", panels.valid);
      write_png(dir / "fig_f_filled.png", panels.filled);
      if (dump_slices) {
        for (std::size_t i = 0; i < panels.slices.masks.size(); ++i) {
          char name[64];
          if (panels.slices.masks[i].count()) {
            std::snprintf(name, sizeof name, "slice_%03zu.png", i);
            write_png(dir / "slices" / name, panels.slices.masks[i]);
          }
          if (panels.filtered_slices.masks[i].count()) {
            std::snprintf(name, sizeof name, "filtered_%03zu.png", i);
            write_png(dir / "slices" / name, panels.filtered_slices.masks[i]);
          }
        }
      }
      const json stats{{"pose", pose_to_json(pose)},
                       {"morphology", {{"erode", image_cfg.erode_size}, {"dilate", image_cfg.dilate_size}}},
                       {"depth_morphology", {{"erode", depth_cfg.erode_size}, {"dilate", depth_cfg.dilate_size}}},
                       {"naive_isolated_pixels", panels.naive_isolated},
                       {"filtered_isolated_pixels", panels.filtered_isolated},
                       {"naive_valid_pixels", panels.naive.valid.count()},
                       {"valid_pixels", panels.valid.count()},
                       {"depth_valid_pixels", dw.valid.count()}};
      write_text(dir / "stats.json", stats.dump(2) + "\n");
    } else if (*cycle) {
      std::vector<Sample> samples;
      if (!dataset_path.empty() || !manifest_path.empty()) {
        IngestOptions opts;
        if (!g.resolution.empty()) opts.resolution = parse_resolution(g.resolution);
        if (!manifest_path.empty()) opts.manifest = manifest_path;
        const IngestResult res = ingest_dataset(dataset_path, opts, schedule);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& rec : res.records) samples.push_back(load_sample(rec, opts.resolution, schedule));
      } else {
        if (image_path.empty() || depth_path.empty())
          throw InputError("cycle needs --image and --depth, or --dataset/--manifest");
        Inputs in = load_inputs(g, image_path, depth_path);
        samples.push_back({fs::path(image_path).stem().string(), std::move(in.image), std::move(in.depth), {}});
      }
      const int mode = mode_arg == "forward" ? 0 : mode_arg == "inverse" ? 1 : 2;
      const ToyFeatureExtractor toy;
      const FeatureExtractor extractor = toy;
      PoseSampler sampler(g.sampler());
      json results = json::array();
      for (const Sample& s : samples) {
        CameraPose pose;
        if (s.pose) {
          pose = *s.pose;
        } else if (!pose_arg.empty()) {
          pose = resolve_pose(g, pose_arg, true);
        } else {
          pose = sampler.next();
        }
        PassConfig cfg;
        cfg.schedule = schedule;
        cfg.image_morph = g.image_morph(s.image.width());
        cfg.depth_morph = g.depth_morph(s.image.width());
        cfg.loss = g.loss();
        cfg.masked_loss = masked_loss;
        if (features_arg == "toy") cfg.features = &extractor;
        const OracleProducer producer{schedule};
        json entry{{"sample", s.name}, {"mode", pass_name(mode)}, {"pose", pose_to_json(pose)}};
        auto dump = [&](const std::string& name, const PassBundle& b) {
          if (dump_dir.empty()) return;
          const fs::path dir = fs::path(dump_dir) / s.name;
          write_png(dir / (name + "_input.png"), b.input);
          write_png(dir / (name + "_rendered.png"), b.rendered);
          write_png(dir / (name + "_reference.png"), b.reference);
          write_png(dir / (name + "_coverage.png"), b.coverage);
        };
        if (mode == 0) {
          const PassBundle b = forward_pass(s, pose, producer, cfg);
          check_finite(b.losses);
          entry["forward"] = loss_report_json(b.losses);
          dump("forward", b);
        } else if (mode == 1) {
          const PassBundle b = inverse_pass(s, pose, producer, cfg);
          check_finite(b.losses);
          entry["backward"] = loss_report_json(b.losses);
          dump("backward", b);
        } else {
          const auto [f, b] = cyclic_pass(s, pose, producer, cfg);
          check_finite(f.losses);
          check_finite(b.losses);
          entry["forward"] = loss_report_json(f.losses);
          entry["backward"] = loss_report_json(b.losses);
          dump("forward", f);
          dump("backward", b);
        }
        results.push_back(std::move(entry));
      }
      emit(json{{"results", results}}.dump(2) + "\n", out_path);
    } else if (*eval) {
      std::vector<std::pair<fs::path, fs::path>> pairs;
      if (fs::is_directory(ref_path)) {
        if (!fs::is_directory(pred_path)) throw InputError(pred_path + ": expected a directory to match " + ref_path);
        std::vector<fs::path> refs;
        for (const auto& e : fs::directory_iterator(ref_path))
          if (e.is_regular_file() && e.path().extension() == ".png") refs.push_back(e.path());
        std::sort(refs.begin(), refs.end());
        for (const auto& r : refs) {
          const fs::path p = fs::path(pred_path) / r.filename();
          if (!fs::exists(p)) throw InputError(p.string() + ": missing prediction for " + r.string());
          pairs.emplace_back(r, p);
        }
      } else {
        pairs.emplace_back(ref_path, pred_path);
      }
      json records = json::array();
      std::string csv = "name,psnr,ssim,pix\n";
      double sum_psnr = 0, sum_ssim = 0, sum_pix = 0;
      for (const auto& [r, p] : pairs) {
        const Image ref = load_rgb(r), pred = load_rgb(p);
        const double m_psnr = psnr(ref, pred), m_ssim = ssim(ref, pred), m_pix = pixel_loss(ref, pred);
        if (!std::isfinite(m_psnr) || !std::isfinite(m_ssim) || !std::isfinite(m_pix))
          throw NumericError("metric evaluation produced a non-finite value");
        records.push_back({{"ref", r.string()}, {"pred", p.string()}, {"psnr", m_psnr}, {"ssim", m_ssim}, {"pix", m_pix}});
        csv += r.filename().string() + "," + fmt_double(m_psnr) + "," + fmt_double(m_ssim) + "," + fmt_double(m_pix) + "\n";
        sum_psnr += m_psnr;
        sum_ssim += m_ssim;
        sum_pix += m_pix;
      }
      const double n = static_cast<double>(std::max<std::size_t>(1, pairs.size()));
      csv += "mean," + fmt_double(sum_psnr / n) + "," + fmt_double(sum_ssim / n) + "," + fmt_double(sum_pix / n) + "\n";
      json report{{"pairs", records}};
      if (frame_separation) report["frame_separation"] = *frame_separation;
      emit(report.dump(2) + "\n", out_path);
      if (!csv_path.empty()) write_text(csv_path, csv);
    } else if (*exportv) {
      if (!mpi_path.empty()) {
        export_viewer_bundle(load_mpi(mpi_path), out_path, g.sampler());
      } else {
        if (image_path.empty() || depth_path.empty()) throw InputError("export-viewer needs --mpi or --image/--depth");
        const Inputs in = load_inputs(g, image_path, depth_path);
        export_viewer_bundle(oracle_mpi(in.image, in.depth, schedule), out_path, g.sampler());
      }
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
