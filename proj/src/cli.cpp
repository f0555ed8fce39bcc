#include "unigs/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "unigs/binding.hpp"
#include "unigs/deform.hpp"
#include "unigs/error.hpp"
#include "unigs/io.hpp"
#include "unigs/oracle.hpp"
#include "unigs/parallel.hpp"
#include "unigs/testscenes.hpp"
#include "unigs/unified_raster.hpp"

namespace unigs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SceneSource {
  std::string config;
  std::string builtin;
  std::string mode;
  int msaa = 0;
  int width = 0;
  int height = 0;
};

struct LoadedScene {
  Scene scene;
  RenderSettings settings;
  Camera camera;
};

void add_scene_options(CLI::App* cmd, SceneSource& src) {
  auto* config = cmd->add_option("--config", src.config, "Scene config JSON");
  auto* builtin = cmd->add_option("--builtin", src.builtin, "Generated scene name");
  config->excludes(builtin);
  cmd->add_option("--mode", src.mode, "Blend mode: naive, whole_pixel_entity, paper_literal, exact_entity");
  cmd->add_option("--msaa", src.msaa, "MSAA samples per pixel (1-64)");
  cmd->add_option("--width", src.width, "Override image width");
  cmd->add_option("--height", src.height, "Override image height");
}

LoadedScene load_scene(const SceneSource& src, const std::string& fallback_builtin = "") {
  LoadedScene out;
  if (!src.config.empty()) {
    SceneConfig cfg = load_scene_config(src.config);
    if (src.width > 0) cfg.width = src.width;
    if (src.height > 0) cfg.height = src.height;
    out.scene = std::move(cfg.scene);
    out.settings = cfg.settings;
    out.camera = cfg.make_camera();
  } else {
    const std::string name = src.builtin.empty() ? fallback_builtin : src.builtin;
    if (name.empty()) throw InputError("one of --config or --builtin is required");
    testscenes::BuiltinScene b = testscenes::builtin(name);
    out.scene = std::move(b.scene);
    out.settings = b.settings;
    out.camera = b.camera;
    if (src.width > 0 || src.height > 0) {
      const double sx = src.width > 0 ? double(src.width) / out.camera.width : 1.0;
      const double sy = src.height > 0 ? double(src.height) / out.camera.height : 1.0;
      out.camera.fx *= sx;
      out.camera.cx *= sx;
      out.camera.fy *= sy;
      out.camera.cy *= sy;
      if (src.width > 0) out.camera.width = src.width;
      if (src.height > 0) out.camera.height = src.height;
    }
  }
  if (!src.mode.empty()) out.settings.blend_mode = parse_blend_mode(src.mode);
  if (src.msaa != 0) out.settings.msaa_samples = src.msaa;
  auto diags = validate_settings(out.settings);
  const auto cam_diags = validate_camera(out.camera);
  diags.insert(diags.end(), cam_diags.begin(), cam_diags.end());
  if (!diags.empty()) throw InvariantError(to_string(diags[0]));
  return out;
}

void apply_threads(int threads) {
  if (threads > 0) {
    set_thread_count(threads);
    return;
  }
  if (const char* env = std::getenv("UNIGS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) throw InputError("UNIGS_THREADS must be a non-negative integer");
    set_thread_count(static_cast<int>(v));
  }
}

json diff_json(const ImageDiff& d, int width, int height) {
  auto channels = [](const Rgb& c) { return json::array({c.x(), c.y(), c.z()}); };
  json j = {{"width", width},
            {"height", height},
            {"mean_abs_error", d.mean_abs_error},
            {"mean_abs_error_channel", channels(d.mean_abs_error_channel)},
            {"max_abs_error", d.max_abs_error},
            {"max_abs_error_channel", channels(d.max_abs_error_channel)},
            {"mse", d.mse}};
  if (std::isinf(d.psnr)) {
    j["psnr"] = "inf";
  } else {
    j["psnr"] = d.psnr;
  }
  return j;
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (rank - lo) * (v[hi] - v[lo]);
}

json bench_config(const std::string& name, const Scene& scene, const Camera& camera,
                  const RenderSettings& settings, int warmup, int iterations) {
  using clock = std::chrono::steady_clock;
  std::vector<double> times;
  RenderStats stats;
  for (int i = 0; i < warmup + iterations; ++i) {
    const auto t0 = clock::now();
    render(scene, camera, settings, &stats);
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (i >= warmup) times.push_back(ms);
  }
  double mean = 0.0;
  for (double t : times) mean += t;
  mean /= times.size();
  return {{"name", name},
          {"iterations", iterations},
          {"warmup", warmup},
          {"mean_ms", mean},
          {"median_ms", percentile(times, 0.5)},
          {"p95_ms", percentile(times, 0.95)},
          {"gaussian_fragments", stats.gaussian_fragments},
          {"triangle_fragments", stats.triangle_fragments},
          {"tiles_total", stats.tiles_total},
          {"tiles_occupied", stats.tiles_occupied},
          {"max_list_length", stats.max_list_length}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError(path, "cannot open file for writing");
  f << text << '\n';
  if (!f) throw IoError(path, "write failed");
}

std::vector<std::string> sorted_files(const std::string& dir, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unified Gaussian splat and mesh renderer, binder and deformer", "unigs"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: UNIGS_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  // render
  SceneSource render_src;
  std::string render_cameras, render_out, render_format;
  auto* render_cmd = app.add_subcommand("render", "Render a scene to PNG or PFM images");
  add_scene_options(render_cmd, render_src);
  render_cmd->add_option("--cameras", render_cameras, "NeRF-style transforms JSON");
  render_cmd->add_option("--out", render_out, "Output image, or directory for several cameras")->required();
  render_cmd->add_option("--format", render_format, "png or pfm")->check(CLI::IsMember({"png", "pfm"}));
  render_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::NonNegativeNumber);

  // bind
  std::string bind_splats, bind_mesh, bind_cameras, bind_mode = "bbx8", bind_out;
  double k_sigma = 3.0;
  auto* bind_cmd = app.add_subcommand("bind", "Bind splats to a proxy mesh by ray casting");
  bind_cmd->add_option("--splats", bind_splats, "Splat PLY")->required();
  bind_cmd->add_option("--mesh", bind_mesh, "Proxy mesh OBJ")->required();
  bind_cmd->add_option("--cameras", bind_cameras, "NeRF-style transforms JSON")->required();
  bind_cmd->add_option("--mode", bind_mode, "center or bbx8")->check(CLI::IsMember({"center", "bbx8"}));
  bind_cmd->add_option("--k-sigma", k_sigma, "Box half-extent in standard deviations")
      ->check(CLI::PositiveNumber);
  bind_cmd->add_option("--out", bind_out, "Binding file")->required();
  bind_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::NonNegativeNumber);

  // deform
  std::string def_splats, def_binding, def_rest, def_deformed, def_out;
  bool drop_sh = false;
  auto* deform_cmd = app.add_subcommand("deform", "Transfer a mesh deformation to bound splats");
  deform_cmd->add_option("--splats", def_splats, "Splat PLY")->required();
  deform_cmd->add_option("--binding", def_binding, "Binding file")->required();
  deform_cmd->add_option("--rest-mesh", def_rest, "Rest-pose proxy mesh OBJ")->required();
  deform_cmd->add_option("--deformed-mesh", def_deformed, "Deformed mesh OBJ, or a directory of them")
      ->required();
  deform_cmd->add_option("--out", def_out, "Output PLY, or directory for per-frame PLYs")->required();
  deform_cmd->add_flag("--drop-sh-rest", drop_sh, "Zero SH degrees >= 1 in the output");
  deform_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::NonNegativeNumber);

  // bench
  SceneSource bench_src;
  int iterations = 10, warmup = 1;
  std::string bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "Time rendering with and without the scene's meshes");
  add_scene_options(bench_cmd, bench_src);
  bench_cmd->add_option("--iterations", iterations, "Timed frames per configuration");
  bench_cmd->add_option("--warmup", warmup, "Untimed frames per configuration")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--out", bench_out, "Also write the JSON report here");
  bench_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::NonNegativeNumber);

  // diff
  SceneSource diff_src;
  std::vector<std::string> diff_images;
  int samples = 16;
  std::string diff_out;
  auto* diff_cmd = app.add_subcommand(
      "diff", "Compare two images, or a render against the supersampled oracle");
  diff_cmd->add_option("images", diff_images, "Two images (PNG or PFM)")->expected(0, 2);
  add_scene_options(diff_cmd, diff_src);
  diff_cmd->add_option("--samples", samples, "Oracle samples per axis")->check(CLI::Range(1, 64));
  diff_cmd->add_option("--out", diff_out, "Also write the JSON report here");
  diff_cmd->add_option("--threads", threads, "Worker threads")->check(CLI::NonNegativeNumber);

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    apply_threads(threads);

    if (render_cmd->parsed()) {
      const LoadedScene ls = load_scene(render_src);
      std::vector<Camera> cameras;
      if (!render_cameras.empty()) {
        if (render_src.width > 0 || render_src.height > 0) {
          throw InputError("--width/--height cannot be combined with --cameras");
        }
        cameras = load_cameras_json(render_cameras);
      } else {
        cameras.push_back(ls.camera);
      }
      if (cameras.empty()) throw InputError(render_cameras + ": no frames");
      std::string ext = render_format.empty() ? "" : "." + render_format;
      const bool single = cameras.size() == 1 && fs::path(render_out).has_extension();
      if (single && ext.empty()) ext = fs::path(render_out).extension().string();
      if (ext.empty()) ext = ".png";
      if (!single) fs::create_directories(render_out);
      json written = json::array();
      for (std::size_t i = 0; i < cameras.size(); ++i) {
        const auto diags = validate_camera(cameras[i]);
        if (!diags.empty()) throw InvariantError("camera " + std::to_string(i) + ": " + to_string(diags[0]));
        const Image img = render(ls.scene, cameras[i], ls.settings);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03zu", i);
        const std::string path = single ? fs::path(render_out).replace_extension(ext).string()
                                        : (fs::path(render_out) / (name + ext)).string();
        write_image(img, path);
        written.push_back(path);
      }
      out << json{{"mode", to_string(ls.settings.blend_mode)}, {"images", written}}.dump() << "\n";
      return kOk;
    }

    if (bind_cmd->parsed()) {
      const SplatSet splats = load_splat_ply(bind_splats);
      const TriMesh mesh = load_obj(bind_mesh);
      const auto cameras = load_cameras_json(bind_cameras);
      const auto t0 = std::chrono::steady_clock::now();
      const BindingTable table = unigs::bind(splats, mesh, cameras, parse_bind_mode(bind_mode), k_sigma);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      save_binding(table, bind_out);
      out << json{{"gaussians", table.gaussian_count},
                  {"anchors", table.anchors.size()},
                  {"fallback_anchors", table.fallback_count()},
                  {"mode", to_string(table.mode)},
                  {"seconds", secs},
                  {"out", bind_out}}
                 .dump()
          << "\n";
      return kOk;
    }

    if (deform_cmd->parsed()) {
      const SplatSet splats = load_splat_ply(def_splats);
      const BindingTable table = load_binding(def_binding);
      const TriMesh rest = load_obj(def_rest);
      std::vector<std::pair<std::string, std::string>> jobs;  // mesh, output
      if (fs::is_directory(def_deformed)) {
        fs::create_directories(def_out);
        for (const std::string& mesh : sorted_files(def_deformed, ".obj")) {
          jobs.emplace_back(mesh, (fs::path(def_out) / fs::path(mesh).stem()).string() + ".ply");
        }
        if (jobs.empty()) throw InputError(def_deformed + ": no .obj files");
      } else {
        jobs.emplace_back(def_deformed, def_out);
      }
      json frames = json::array();
      for (const auto& [mesh_path, out_path] : jobs) {
        const TriMesh deformed = load_obj(mesh_path);
        const VertexTransformField field = vertex_deformation_gradients(rest, deformed);
        DeformReport report;
        const SplatSet result = apply_deformation(splats, table, field, {drop_sh}, &report);
        save_splat_ply(result, out_path);
        if (report.rotation_warnings > 0) {
          err << "warning: " << mesh_path << ": " << report.rotation_warnings
              << " gaussians have anchor rotations more than 90 degrees apart\n";
        }
        if (field.isolated_vertices > 0) {
          err << "warning: " << mesh_path << ": " << field.isolated_vertices
              << " isolated vertices given the identity transform\n";
        }
        frames.push_back({{"mesh", mesh_path},
                          {"out", out_path},
                          {"rotation_warnings", report.rotation_warnings},
                          {"fallback_anchors", report.fallback_anchors}});
      }
      out << json{{"frames", frames}}.dump() << "\n";
      return kOk;
    }

    if (bench_cmd->parsed()) {
      if (iterations < 1) throw InputError("--iterations must be at least 1");
      const LoadedScene ls = load_scene(bench_src, "bench");
      Scene splats_only = ls.scene;
      splats_only.mesh_objects.clear();
      json report;
      report["width"] = ls.camera.width;
      report["height"] = ls.camera.height;
      report["threads"] = thread_count();
      report["configurations"] = json::array(
          {bench_config("gaussians_only", splats_only, ls.camera, ls.settings, warmup, iterations),
           bench_config("gaussians_and_mesh", ls.scene, ls.camera, ls.settings, warmup, iterations)});
      const double base = report["configurations"][0]["median_ms"].get<double>();
      const double with_mesh = report["configurations"][1]["median_ms"].get<double>();
      report["ratio_median"] = base > 0.0 ? with_mesh / base : 0.0;
      const std::string text = report.dump(2);
      out << text << "\n";
      if (!bench_out.empty()) write_text(bench_out, text);
      return kOk;
    }

    if (diff_cmd->parsed()) {
      json report;
      if (diff_images.size() == 2) {
        if (!diff_src.config.empty() || !diff_src.builtin.empty()) {
          throw InputError("give either two images or a scene, not both");
        }
        const Image a = read_image(diff_images[0]);
        const Image b = read_image(diff_images[1]);
        report = diff_json(unigs::diff_images(a, b), a.width, a.height);
      } else if (diff_images.empty() && (!diff_src.config.empty() || !diff_src.builtin.empty())) {
        const LoadedScene ls = load_scene(diff_src);
        const Image img = render(ls.scene, ls.camera, ls.settings);
        const oracle::OracleImage ref =
            oracle::supersample_render(ls.scene, ls.camera, samples, ls.settings);
        report = diff_json(unigs::diff_images(img, ref.pixels), img.width, img.height);
        report["mode"] = to_string(ls.settings.blend_mode);
        report["samples_per_axis"] = samples;
      } else {
        throw InputError("diff needs two images, or --config/--builtin to compare against the oracle");
      }
      const std::string text = report.dump(2);
      out << text << "\n";
      if (!diff_out.empty()) write_text(diff_out, text);
      return kOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kUsageError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace unigs::cli
