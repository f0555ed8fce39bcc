#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unigs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;  // constructed as Quat(w, x, y, z)
using Rgb = Eigen::Vector3d;

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Trained Gaussian splats in canonical in-memory form: linear scales,
// post-sigmoid opacities, unit quaternions. Spherical-harmonic coefficients
// are laid out [gaussian][channel][coefficient].
struct SplatSet {
  std::vector<Vec3> positions;
  std::vector<Quat> rotations;
  std::vector<Vec3> scales;
  std::vector<double> opacities;
  int sh_degree = 0;
  std::vector<double> sh_coeffs;

  std::size_t size() const { return positions.size(); }
  int coeffs_per_channel() const { return sh_coeff_count(sh_degree); }

  std::span<const double> sh(std::size_t i) const {
    const std::size_t n = 3 * static_cast<std::size_t>(coeffs_per_channel());
    return {sh_coeffs.data() + i * n, n};
  }
  std::span<double> sh(std::size_t i) {
    const std::size_t n = 3 * static_cast<std::size_t>(coeffs_per_channel());
    return {sh_coeffs.data() + i * n, n};
  }

  // Resizes every array to `n` Gaussians with identity defaults.
  void resize(std::size_t n);
  void append(const SplatSet& other);
};

using Face = std::array<int, 3>;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Rgb> vertex_colors;  // empty, or one per vertex
  Rgb base_color{0.8, 0.8, 0.8};
  double opacity = 1.0;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool has_vertex_colors() const { return !vertex_colors.empty(); }

  // FNV-1a over vertex coordinates and face indices. Colors and opacity are
  // excluded: bindings only depend on geometry.
  std::uint64_t content_hash() const;
  double mean_edge_length() const;
};

// Rigid transform with optional uniform scale: x -> scale * R x + t.
struct Placement {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  bool is_identity() const;
};

// Pinhole camera. Camera space is right-handed with +z forward, +y down
// (OpenCV convention). Pixel (i, j) has its center at (i + 0.5, j + 0.5).
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();   // world -> camera
  double near = 0.01;
  double far = 1000.0;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -(rotation.transpose() * translation); }
  Vec2 project(const Vec3& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                        double fov_y_radians, int width, int height);
};

struct SplatObject {
  SplatSet splats;
  Placement placement;
};

struct MeshObject {
  TriMesh mesh;
  Placement placement;
};

struct Scene {
  std::vector<SplatObject> splat_objects;
  std::vector<MeshObject> mesh_objects;
  Rgb background_color = Rgb::Zero();
  double background_opacity = 1.0;
};

enum class BlendMode { Naive, WholePixelEntity, PaperLiteral, ExactEntity };

const char* to_string(BlendMode mode);
BlendMode parse_blend_mode(const std::string& name);

struct RenderSettings {
  int msaa_samples = 4;
  BlendMode blend_mode = BlendMode::ExactEntity;
  double alpha_cutoff = 1.0 / 255.0;
  double termination_threshold = 1e-4;
  double gaussian_dilation = 0.3;
  std::size_t max_fragments_per_tile = std::size_t{1} << 26;
};

struct Diagnostic {
  std::string object;
  std::string field;
  std::string message;
};

std::string to_string(const Diagnostic& d);

std::vector<Diagnostic> validate_splats(const SplatSet& splats, const std::string& name);
std::vector<Diagnostic> validate_mesh(const TriMesh& mesh, const std::string& name);
std::vector<Diagnostic> validate_scene(const Scene& scene);
std::vector<Diagnostic> validate_camera(const Camera& camera);
std::vector<Diagnostic> validate_settings(const RenderSettings& settings);

// Asset transforms, used both for render-time placement and for baking.
SplatSet transform_splats(const SplatSet& splats, const Placement& placement);
TriMesh transform_mesh(const TriMesh& mesh, const Placement& placement);

// Scale-and-rotation factors of a Gaussian's covariance: R diag(s)^2 R^T.
Mat3 covariance_from(const Quat& rotation, const Vec3& scale);

}  // namespace unigs
