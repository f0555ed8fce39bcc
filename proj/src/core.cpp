#include "unigs/core.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "unigs/error.hpp"

namespace unigs {

void SplatSet::resize(std::size_t n) {
  positions.resize(n, Vec3::Zero());
  rotations.resize(n, Quat::Identity());
  scales.resize(n, Vec3::Ones());
  opacities.resize(n, 1.0);
  sh_coeffs.resize(n * 3 * static_cast<std::size_t>(coeffs_per_channel()), 0.0);
}

void SplatSet::append(const SplatSet& other) {
  if (size() != 0 && other.size() != 0 && other.sh_degree != sh_degree) {
    throw InvariantError("cannot append splat sets with different sh_degree");
  }
  if (size() == 0) sh_degree = other.sh_degree;
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  rotations.insert(rotations.end(), other.rotations.begin(), other.rotations.end());
  scales.insert(scales.end(), other.scales.begin(), other.scales.end());
  opacities.insert(opacities.end(), other.opacities.begin(), other.opacities.end());
  sh_coeffs.insert(sh_coeffs.end(), other.sh_coeffs.begin(), other.sh_coeffs.end());
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t TriMesh::content_hash() const {
  std::uint64_t h = kFnvOffset;
  const std::uint64_t counts[2] = {vertices.size(), faces.size()};
  fnv_mix(h, counts, sizeof(counts));
  for (const Vec3& v : vertices) {
    const double xyz[3] = {v.x(), v.y(), v.z()};
    fnv_mix(h, xyz, sizeof(xyz));
  }
  for (const Face& f : faces) {
    const std::int32_t idx[3] = {f[0], f[1], f[2]};
    fnv_mix(h, idx, sizeof(idx));
  }
  return h;
}

double TriMesh::mean_edge_length() const {
  if (faces.empty()) return 0.0;
  double sum = 0.0;
  for (const Face& f : faces) {
    for (int k = 0; k < 3; ++k) {
      sum += (vertices[f[k]] - vertices[f[(k + 1) % 3]]).norm();
    }
  }
  return sum / (3.0 * static_cast<double>(faces.size()));
}

bool Placement::is_identity() const {
  return scale == 1.0 && translation.isZero(0.0) && rotation.w() == 1.0 &&
         rotation.vec().isZero(0.0);
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                       double fov_y_radians, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  // Camera axes satisfy down = forward x right, with down opposite to `up`.
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) {
    right = forward.unitOrthogonal();
  }
  right.normalize();
  const Vec3 down = forward.cross(right);

  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fy = 0.5 * height / std::tan(0.5 * fov_y_radians);
  cam.fx = cam.fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -(cam.rotation * eye);
  return cam;
}

const char* to_string(BlendMode mode) {
  switch (mode) {
    case BlendMode::Naive: return "naive";
    case BlendMode::WholePixelEntity: return "whole_pixel_entity";
    case BlendMode::PaperLiteral: return "paper_literal";
    case BlendMode::ExactEntity: return "exact_entity";
  }
  return "unknown";
}

BlendMode parse_blend_mode(const std::string& name) {
  if (name == "naive") return BlendMode::Naive;
  if (name == "whole_pixel_entity") return BlendMode::WholePixelEntity;
  if (name == "paper_literal") return BlendMode::PaperLiteral;
  if (name == "exact_entity") return BlendMode::ExactEntity;
  throw InputError("unknown blend mode '" + name + "'");
}

std::string to_string(const Diagnostic& d) {
  return d.object + "." + d.field + ": " + d.message;
}

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

std::vector<Diagnostic> validate_splats(const SplatSet& s, const std::string& name) {
  std::vector<Diagnostic> out;
  const std::size_t n = s.size();
  if (s.rotations.size() != n || s.scales.size() != n || s.opacities.size() != n) {
    out.push_back({name, "count", "array lengths disagree"});
    return out;
  }
  if (s.sh_degree < 0 || s.sh_degree > 3) {
    out.push_back({name, "sh_degree", "sh_degree outside [0,3]"});
    return out;
  }
  if (s.sh_coeffs.size() != n * 3 * static_cast<std::size_t>(s.coeffs_per_channel())) {
    out.push_back({name, "sh_coeffs", "coefficient count does not match sh_degree"});
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string at = name + "[" + std::to_string(i) + "]";
    if (!finite(s.positions[i])) out.push_back({at, "position", "non-finite position"});
    if (std::abs(s.rotations[i].norm() - 1.0) > 1e-4) {
      out.push_back({at, "rotation", "quaternion not unit norm"});
    }
    if (!(s.scales[i].minCoeff() > 0.0) || !finite(s.scales[i])) {
      out.push_back({at, "scale", "scale non-positive"});
    }
    if (!in_unit_interval(s.opacities[i])) {
      out.push_back({at, "opacity", "opacity outside [0,1]"});
    }
  }
  return out;
}

std::vector<Diagnostic> validate_mesh(const TriMesh& m, const std::string& name) {
  std::vector<Diagnostic> out;
  const auto v = static_cast<long long>(m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    if (!finite(m.vertices[i])) {
      out.push_back({name + ".vertices[" + std::to_string(i) + "]", "position",
                     "non-finite vertex"});
    }
  }
  for (std::size_t i = 0; i < m.faces.size(); ++i) {
    const Face& f = m.faces[i];
    const std::string at = name + ".faces[" + std::to_string(i) + "]";
    bool in_range = true;
    for (int k : f) {
      if (k < 0 || k >= v) in_range = false;
    }
    if (!in_range) out.push_back({at, "indices", "face index out of range"});
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      out.push_back({at, "indices", "degenerate face"});
    }
  }
  if (m.has_vertex_colors() && m.vertex_colors.size() != m.vertices.size()) {
    out.push_back({name, "vertex_colors", "vertex color count differs from vertex count"});
  }
  for (const Rgb& c : m.vertex_colors) {
    if (!(c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0)) {
      out.push_back({name, "vertex_colors", "vertex color outside [0,1]"});
      break;
    }
  }
  if (!(m.base_color.minCoeff() >= 0.0 && m.base_color.maxCoeff() <= 1.0)) {
    out.push_back({name, "base_color", "base color outside [0,1]"});
  }
  if (!(m.opacity > 0.0 && m.opacity <= 1.0)) {
    out.push_back({name, "opacity", "mesh opacity outside (0,1]"});
  }
  return out;
}

namespace {

void validate_placement(const Placement& p, const std::string& name,
                        std::vector<Diagnostic>& out) {
  if (std::abs(p.rotation.norm() - 1.0) > 1e-4) {
    out.push_back({name, "placement.rotation", "quaternion not unit norm"});
  }
  if (!(p.scale > 0.0) || !std::isfinite(p.scale)) {
    out.push_back({name, "placement.scale", "placement scale non-positive"});
  }
  if (!finite(p.translation)) {
    out.push_back({name, "placement.translation", "non-finite translation"});
  }
}

}  // namespace

std::vector<Diagnostic> validate_scene(const Scene& scene) {
  std::vector<Diagnostic> out;
  for (std::size_t i = 0; i < scene.splat_objects.size(); ++i) {
    const std::string name = "splat_objects[" + std::to_string(i) + "]";
    auto d = validate_splats(scene.splat_objects[i].splats, name);
    out.insert(out.end(), d.begin(), d.end());
    validate_placement(scene.splat_objects[i].placement, name, out);
  }
  for (std::size_t i = 0; i < scene.mesh_objects.size(); ++i) {
    const std::string name = "mesh_objects[" + std::to_string(i) + "]";
    auto d = validate_mesh(scene.mesh_objects[i].mesh, name);
    out.insert(out.end(), d.begin(), d.end());
    validate_placement(scene.mesh_objects[i].placement, name, out);
  }
  if (!in_unit_interval(scene.background_opacity)) {
    out.push_back({"scene", "background_opacity", "background opacity outside [0,1]"});
  }
  if (!finite(scene.background_color)) {
    out.push_back({"scene", "background_color", "non-finite background color"});
  }
  return out;
}

std::vector<Diagnostic> validate_camera(const Camera& c) {
  std::vector<Diagnostic> out;
  if (c.width <= 0 || c.height <= 0) out.push_back({"camera", "size", "non-positive image size"});
  if (!(c.fx > 0.0) || !(c.fy > 0.0)) out.push_back({"camera", "focal", "non-positive focal length"});
  const Mat3 rtr = c.rotation.transpose() * c.rotation;
  if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-5 ||
      std::abs(c.rotation.determinant() - 1.0) > 1e-5) {
    out.push_back({"camera", "rotation", "world_to_camera rotation not orthonormal with det +1"});
  }
  if (!(c.near > 0.0 && c.near < c.far)) out.push_back({"camera", "near/far", "requires 0 < near < far"});
  return out;
}

std::vector<Diagnostic> validate_settings(const RenderSettings& s) {
  std::vector<Diagnostic> out;
  if (s.msaa_samples < 1 || s.msaa_samples > 64) {
    out.push_back({"render", "msaa_samples", "msaa sample count outside [1,64]"});
  }
  if (!(s.alpha_cutoff > 0.0 && s.alpha_cutoff < 1.0)) {
    out.push_back({"render", "alpha_cutoff", "alpha_cutoff outside (0,1)"});
  }
  if (!(s.termination_threshold > 0.0 && s.termination_threshold < 1.0)) {
    out.push_back({"render", "termination_threshold", "termination_threshold outside (0,1)"});
  }
  if (!(s.gaussian_dilation >= 0.0)) {
    out.push_back({"render", "gaussian_dilation", "negative dilation"});
  }
  return out;
}

SplatSet transform_splats(const SplatSet& splats, const Placement& p) {
  if (p.is_identity()) return splats;
  SplatSet out = splats;
  const Quat r = p.rotation.normalized();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.positions[i] = p.apply(splats.positions[i]);
    out.rotations[i] = (r * splats.rotations[i]).normalized();
    out.scales[i] = splats.scales[i] * p.scale;
  }
  return out;
}

TriMesh transform_mesh(const TriMesh& mesh, const Placement& p) {
  if (p.is_identity()) return mesh;
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = p.apply(v);
  return out;
}

Mat3 covariance_from(const Quat& rotation, const Vec3& scale) {
  const Mat3 r = rotation.normalized().toRotationMatrix();
  const Mat3 m = r * scale.asDiagonal();
  return m * m.transpose();
}

}  // namespace unigs
