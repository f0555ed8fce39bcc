#include "unigs/testscenes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "unigs/error.hpp"
#include "unigs/splat_projection.hpp"

namespace unigs::testscenes {

namespace {

// mt19937_64 is specified bit-for-bit by the standard; the distributions are
// not, so values are derived from raw draws here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * n) % n; }
  Quat rotation() {
    const double u1 = uniform(), u2 = uniform(), u3 = uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    return Quat(b * std::cos(2 * M_PI * u3), a * std::sin(2 * M_PI * u2), a * std::cos(2 * M_PI * u2),
                b * std::sin(2 * M_PI * u3));
  }

 private:
  std::mt19937_64 engine_;
};

double dc_for(double color) { return (color - 0.5) / kShC0; }

Vec3 unproject(const Camera& cam, double px, double py, double depth) {
  const Vec3 c((px - cam.cx) / cam.fx * depth, (py - cam.cy) / cam.fy * depth, depth);
  return cam.rotation.transpose() * (c - cam.translation);
}

Camera pinhole(int size, double focal) {
  Camera cam;
  cam.width = size;
  cam.height = size;
  cam.fx = cam.fy = focal;
  cam.cx = cam.cy = 0.5 * size;
  return cam;
}

}  // namespace

TriMesh gen_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || !(radius > 0.0)) throw InputError("icosphere parameters must be positive");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (Vec3& v : mesh.vertices) v.normalize();
  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(mesh.faces.size() * 4);
    for (const Face& f : mesh.faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
  }
  for (Vec3& v : mesh.vertices) v *= radius;
  return mesh;
}

TriMesh gen_torus(int major_segments, int minor_segments, double major_radius, double minor_radius) {
  if (major_segments < 3 || minor_segments < 3) throw InputError("torus needs at least 3 segments");
  TriMesh mesh;
  for (int i = 0; i < major_segments; ++i) {
    const double a = 2 * M_PI * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double b = 2 * M_PI * j / minor_segments;
      const double r = major_radius + minor_radius * std::cos(b);
      mesh.vertices.emplace_back(r * std::cos(a), r * std::sin(a), minor_radius * std::sin(b));
    }
  }
  auto id = [&](int i, int j) {
    return (i % major_segments) * minor_segments + (j % minor_segments);
  };
  for (int i = 0; i < major_segments; ++i) {
    for (int j = 0; j < minor_segments; ++j) {
      mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return mesh;
}

SplatSet gen_random_splats(std::size_t n, std::uint64_t seed, int sh_degree, double extent,
                           double min_scale, double max_scale) {
  Rng rng(seed);
  SplatSet s;
  s.sh_degree = sh_degree;
  s.resize(n);
  const int k = s.coeffs_per_channel();
  const double log_lo = std::log(min_scale), log_hi = std::log(max_scale);
  for (std::size_t i = 0; i < n; ++i) {
    s.positions[i] = Vec3(rng.range(-extent, extent), rng.range(-extent, extent), rng.range(-extent, extent));
    s.scales[i] = Vec3(std::exp(rng.range(log_lo, log_hi)), std::exp(rng.range(log_lo, log_hi)),
                       std::exp(rng.range(log_lo, log_hi)));
    s.rotations[i] = rng.rotation();
    s.opacities[i] = rng.range(0.2, 0.95);
    auto sh = s.sh(i);
    for (int c = 0; c < 3; ++c) {
      sh[c * k] = rng.range(-1.5, 1.5);
      for (int j = 1; j < k; ++j) sh[c * k + j] = rng.range(-0.3, 0.3);
    }
  }
  return s;
}

SplatSet gen_splats_on_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.faces.empty()) throw InputError("cannot place splats on an empty mesh");
  std::vector<double> cumulative;
  double total = 0.0;
  for (const Face& f : mesh.faces) {
    total += 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                       .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                       .norm();
    cumulative.push_back(total);
  }
  const double edge = mesh.mean_edge_length();
  Rng rng(seed);
  SplatSet s;
  s.sh_degree = 0;
  s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    const std::size_t fi = std::min<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(),
        mesh.faces.size() - 1);
    const Face& f = mesh.faces[fi];
    const Vec3 a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    const Vec3 normal = (b - a).cross(c - a).normalized();
    const Vec3 point = (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c;
    s.positions[i] = point + normal * rng.range(-5e-4, 5e-4);

    const Vec3 tangent = (b - a).normalized();
    Mat3 frame;
    frame.col(0) = tangent;
    frame.col(1) = normal.cross(tangent);
    frame.col(2) = normal;
    const double spin = rng.range(0.0, 2 * M_PI);
    s.rotations[i] = Quat(frame) * Quat(Eigen::AngleAxisd(spin, Vec3::UnitZ()));
    s.scales[i] = Vec3(rng.range(0.15, 0.4) * edge, rng.range(0.15, 0.4) * edge, 0.02 * edge);
    s.opacities[i] = rng.range(0.3, 0.95);
    auto sh = s.sh(i);
    for (int ch = 0; ch < 3; ++ch) sh[ch] = rng.range(-1.5, 1.5);
  }
  return s;
}

std::vector<Camera> gen_orbit_cameras(int count, double distance, int width, int height) {
  std::vector<Camera> cams;
  const double d = distance / std::sqrt(3.0);
  for (int i = 0; i < std::clamp(count, 0, 8); ++i) {
    const Vec3 eye((i & 1) ? d : -d, (i & 2) ? d : -d, (i & 4) ? d : -d);
    cams.push_back(Camera::look_at(eye, Vec3::Zero(), Vec3::UnitY(), M_PI / 4, width, height));
  }
  return cams;
}

BuiltinScene gen_overflow_scene() {
  BuiltinScene out;
  out.name = "overflow";
  out.camera = pinhole(64, 64.0);
  const Camera& cam = out.camera;

  // The near triangle's right edge projects exactly onto the centers of
  // pixel column 32.
  MeshObject near_tri;
  const double xe = unproject(cam, 32.5, 0.0, 2.0).x();
  near_tri.mesh.vertices = {{xe, -20, 2}, {xe, 20, 2}, {-20, 0, 2}};
  near_tri.mesh.faces = {{0, 1, 2}};
  near_tri.mesh.base_color = Rgb(1, 1, 1);
  near_tri.mesh.opacity = 1.0;

  MeshObject far_tri;
  far_tri.mesh.vertices = {{-60, -60, 5}, {60, -60, 5}, {0, 120, 5}};
  far_tri.mesh.faces = {{0, 1, 2}};
  far_tri.mesh.base_color = Rgb(0.9, 0.9, 0.9);
  far_tri.mesh.opacity = 1.0;

  SplatObject blob;
  blob.splats.sh_degree = 0;
  blob.splats.resize(1);
  blob.splats.positions[0] = Vec3(0, 0, 3);
  blob.splats.scales[0] = Vec3(1, 1, 1);
  blob.splats.opacities[0] = 0.8;
  const Rgb color(0.1, 0.2, 0.9);
  for (int c = 0; c < 3; ++c) blob.splats.sh(0)[c] = dc_for(color[c]);

  out.scene.mesh_objects = {near_tri, far_tri};
  out.scene.splat_objects = {blob};
  out.scene.background_color = Rgb::Zero();
  return out;
}

BuiltinScene gen_edge_scene() {
  BuiltinScene out;
  out.name = "edge";
  out.camera = pinhole(64, 64.0);
  const Camera& cam = out.camera;
  MeshObject obj;
  TriMesh& m = obj.mesh;
  m.base_color = Rgb(1, 1, 1);
  m.opacity = 1.0;
  auto add = [&](const Vec2& p) {
    m.vertices.push_back(unproject(cam, p.x(), p.y(), 2.0));
    return static_cast<int>(m.vertices.size()) - 1;
  };
  auto sliver = [&](const Vec2& a, const Vec2& b, double width) {
    const Vec2 dir = (b - a).normalized();
    const Vec2 off = 0.5 * width * Vec2(-dir.y(), dir.x());
    const int i0 = add(a - off), i1 = add(b - off), i2 = add(b + off), i3 = add(a + off);
    m.faces.push_back({i0, i1, i2});
    m.faces.push_back({i0, i2, i3});
  };
  sliver({3.0, 5.2}, {61.0, 9.1}, 0.6);
  sliver({3.0, 14.7}, {61.0, 23.3}, 0.6);
  sliver({3.0, 30.1}, {61.0, 26.4}, 0.6);
  sliver({40.3, 34.0}, {47.9, 62.0}, 0.6);
  sliver({55.2, 33.0}, {52.6, 62.0}, 0.6);
  const int a = add({6.0, 38.0}), b = add({34.0, 44.5}), c = add({12.3, 61.0});
  m.faces.push_back({a, b, c});
  out.scene.mesh_objects = {obj};
  out.scene.background_color = Rgb::Zero();
  return out;
}

BuiltinScene gen_nested_scene(bool with_splats) {
  BuiltinScene out;
  out.name = "nested";
  out.camera = Camera::look_at(Vec3(0, 0, -4), Vec3::Zero(), Vec3::UnitY(), M_PI / 4, 256, 256);

  MeshObject shell;
  shell.mesh = gen_icosphere(2, 1.0);
  shell.mesh.base_color = Rgb(0.6, 0.8, 1.0);
  shell.mesh.opacity = 0.35;
  out.scene.mesh_objects = {shell};

  if (with_splats) {
    const Rgb palette[6] = {{1.0, 0.15, 0.1}, {1.0, 0.8, 0.1}, {0.2, 1.0, 0.2},
                            {1.0, 0.3, 0.9}, {1.0, 0.55, 0.1}, {0.9, 1.0, 0.3}};
    Rng rng(2024);
    SplatObject cluster;
    SplatSet& s = cluster.splats;
    s.sh_degree = 0;
    s.resize(30);
    for (std::size_t i = 0; i < s.size(); ++i) {
      Vec3 p;
      do {
        p = Vec3(rng.range(-0.5, 0.5), rng.range(-0.5, 0.5), rng.range(-0.5, 0.5));
      } while (p.norm() > 0.5);
      s.positions[i] = p;
      s.scales[i] = Vec3(rng.range(0.12, 0.2), rng.range(0.12, 0.2), rng.range(0.12, 0.2));
      s.rotations[i] = rng.rotation();
      s.opacities[i] = rng.range(0.6, 0.9);
      const Rgb& c = palette[i % 6];
      for (int ch = 0; ch < 3; ++ch) s.sh(i)[ch] = dc_for(c[ch]);
    }
    out.scene.splat_objects = {cluster};
  }
  out.scene.background_color = Rgb::Zero();
  return out;
}

BuiltinScene gen_random_scene(std::size_t n, std::uint64_t seed) {
  BuiltinScene out;
  out.name = "random";
  out.camera = Camera::look_at(Vec3(0, 0, -4), Vec3::Zero(), Vec3::UnitY(), M_PI / 4, 512, 512);
  out.scene.splat_objects = {SplatObject{gen_random_splats(n, seed), Placement{}}};
  out.scene.background_color = Rgb(0.1, 0.1, 0.1);
  return out;
}

BuiltinScene gen_bench_scene(bool with_mesh, std::size_t splats) {
  BuiltinScene out;
  out.name = with_mesh ? "bench" : "bench_splats";
  out.camera = Camera::look_at(Vec3(0, 0, -5), Vec3::Zero(), Vec3::UnitY(), M_PI / 4, 800, 800);
  out.scene.splat_objects = {SplatObject{gen_random_splats(splats, 11, 1, 1.5, 0.005, 0.02), Placement{}}};
  if (with_mesh) {
    MeshObject torus;
    torus.mesh = gen_torus(100, 50, 1.0, 0.35);
    torus.mesh.base_color = Rgb(0.9, 0.5, 0.2);
    torus.mesh.opacity = 0.6;
    out.scene.mesh_objects = {torus};
  }
  out.scene.background_color = Rgb::Zero();
  return out;
}

std::vector<std::string> builtin_names() {
  return {"empty", "overflow", "edge", "nested", "nested_mesh_only", "random", "bench", "bench_splats"};
}

BuiltinScene builtin(const std::string& name) {
  if (name == "empty") {
    BuiltinScene s;
    s.name = name;
    s.camera = Camera::look_at(Vec3(0, 0, -4), Vec3::Zero(), Vec3::UnitY(), M_PI / 4, 256, 256);
    return s;
  }
  if (name == "overflow") return gen_overflow_scene();
  if (name == "edge") return gen_edge_scene();
  if (name == "nested") return gen_nested_scene(true);
  if (name == "nested_mesh_only") {
    BuiltinScene s = gen_nested_scene(false);
    s.name = name;
    return s;
  }
  if (name == "random") return gen_random_scene();
  if (name == "bench") return gen_bench_scene(true);
  if (name == "bench_splats") return gen_bench_scene(false);
  std::string known;
  for (const auto& n : builtin_names()) known += (known.empty() ? "" : ", ") + n;
  throw InputError("unknown builtin scene '" + name + "' (known: " + known + ")");
}

}  // namespace unigs::testscenes
