#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unigs/binding_table.hpp"
#include "unigs/core.hpp"
#include "unigs/image.hpp"

namespace unigs {

// Binary little-endian splat PLY in the layout written by the standard
// splatting trainer. Loading applies exp to scales and a sigmoid to
// opacities and renormalizes quaternions; saving applies the inverses.
SplatSet load_splat_ply(const std::string& path);
void save_splat_ply(const SplatSet& splats, const std::string& path);

struct ObjLoadReport {
  std::size_t degenerate_faces_dropped = 0;
  std::size_t polygons_fanned = 0;
};

// ASCII OBJ: `v x y z [r g b]` and `f` records (v, v/vt, v/vt/vn, v//vn,
// negative indices). Polygons are fan-triangulated; faces with repeated
// vertices are dropped and counted.
TriMesh load_obj(const std::string& path, const Rgb& base_color = Rgb(0.8, 0.8, 0.8),
                 double mesh_opacity = 1.0, ObjLoadReport* report = nullptr);
void write_obj(const TriMesh& mesh, const std::string& path);

// NeRF-style transforms JSON. OpenGL camera-to-world matrices are converted
// to +z-forward world-to-camera transforms.
std::vector<Camera> load_cameras_json(const std::string& path);
std::vector<Camera> parse_cameras_json(const std::string& text, const std::string& source);

struct CameraSpec {
  Vec3 eye{0.0, 0.0, -4.0};
  Vec3 target = Vec3::Zero();
  Vec3 up{0.0, 1.0, 0.0};
  double fov_y_deg = 45.0;
  double near = 0.01;
  double far = 1000.0;
};

struct SceneConfig {
  Scene scene;
  RenderSettings settings;
  int width = 512;
  int height = 512;
  std::optional<CameraSpec> camera;

  Camera make_camera() const;
};

// Asset paths are resolved relative to the config file's directory.
SceneConfig load_scene_config(const std::string& path);

// "UGSB1" magic, uint32 header length, JSON header, fixed-size records.
// Saving refuses tables that fail validate_binding.
void save_binding(const BindingTable& table, const std::string& path);
BindingTable load_binding(const std::string& path);

double linear_to_srgb(double v);
double srgb_to_linear(double v);

// 8-bit sRGB PNG. Reading converts back to linear.
void write_png(const Image& image, const std::string& path);
Image read_png(const std::string& path);

// Portable float map, linear values, no quantization.
void write_pfm(const Image& image, const std::string& path);
Image read_pfm(const std::string& path);

// Dispatches on the extension (.png or .pfm).
void write_image(const Image& image, const std::string& path);
Image read_image(const std::string& path);

}  // namespace unigs
