#include "unigs/io.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "unigs/error.hpp"

namespace unigs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(path, fs::exists(path) ? "cannot open file" : "file not found");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError(path, "read failed");
  return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError(path, "write failed");
}

template <class T>
void append_pod(std::string& out, const T& value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T read_pod(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// ---------------------------------------------------------------- PLY

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<PlyType> ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::I8;
  if (name == "uchar" || name == "uint8") return PlyType::U8;
  if (name == "short" || name == "int16") return PlyType::I16;
  if (name == "ushort" || name == "uint16") return PlyType::U16;
  if (name == "int" || name == "int32") return PlyType::I32;
  if (name == "uint" || name == "uint32") return PlyType::U32;
  if (name == "float" || name == "float32") return PlyType::F32;
  if (name == "double" || name == "float64") return PlyType::F64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::I8:
    case PlyType::U8:
      return 1;
    case PlyType::I16:
    case PlyType::U16:
      return 2;
    case PlyType::I32:
    case PlyType::U32:
    case PlyType::F32:
      return 4;
    case PlyType::F64:
      return 8;
  }
  return 0;
}

double ply_read(const char* p, PlyType t) {
  switch (t) {
    case PlyType::I8:
      return read_pod<std::int8_t>(p);
    case PlyType::U8:
      return read_pod<std::uint8_t>(p);
    case PlyType::I16:
      return read_pod<std::int16_t>(p);
    case PlyType::U16:
      return read_pod<std::uint16_t>(p);
    case PlyType::I32:
      return read_pod<std::int32_t>(p);
    case PlyType::U32:
      return read_pod<std::uint32_t>(p);
    case PlyType::F32:
      return read_pod<float>(p);
    case PlyType::F64:
      return read_pod<double>(p);
  }
  return 0.0;
}

struct PlyElement {
  std::string name;
  std::uint64_t count = 0;
  std::size_t stride = 0;
  bool has_list = false;
  std::map<std::string, std::pair<PlyType, std::size_t>, std::less<>> props;  // type, offset
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  p = std::clamp(p, 1e-15, 1.0 - 1e-15);
  return std::log(p / (1.0 - p));
}

}  // namespace

SplatSet load_splat_ply(const std::string& path) {
  const std::string data = read_file(path);
  using U = ParseError::Unit;

  std::size_t pos = 0;
  auto next_line = [&](std::size_t& line_start) -> std::optional<std::string_view> {
    if (pos >= data.size()) return std::nullopt;
    line_start = pos;
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) return std::nullopt;
    std::string_view line(data.data() + pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    return line;
  };

  std::size_t at = 0;
  auto first = next_line(at);
  if (!first || *first != "ply") throw ParseError(path, U::Byte, 0, "missing 'ply' magic");

  std::vector<PlyElement> elements;
  bool format_ok = false;
  bool ended = false;
  std::size_t end_header_at = 0;
  while (auto line = next_line(at)) {
    const auto tok = split_ws(*line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 3 || tok[1] != "binary_little_endian") {
        throw ParseError(path, U::Byte, at, "unsupported PLY format (binary_little_endian required)");
      }
      format_ok = true;
    } else if (tok[0] == "element") {
      PlyElement e;
      if (tok.size() != 3 || !parse_number(tok[2], e.count)) {
        throw ParseError(path, U::Byte, at, "malformed element line");
      }
      e.name = std::string(tok[1]);
      elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError(path, U::Byte, at, "property before any element");
      PlyElement& e = elements.back();
      if (tok.size() >= 2 && tok[1] == "list") {
        e.has_list = true;
        continue;
      }
      const auto type = tok.size() == 3 ? ply_type(tok[1]) : std::nullopt;
      if (!type) throw ParseError(path, U::Byte, at, "malformed property line");
      e.props.emplace(std::string(tok[2]), std::make_pair(*type, e.stride));
      e.stride += ply_size(*type);
    } else if (tok[0] == "end_header") {
      ended = true;
      end_header_at = at;
      break;
    } else {
      throw ParseError(path, U::Byte, at, "unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!ended) throw ParseError(path, U::Byte, data.size(), "header has no end_header");
  if (!format_ok) throw ParseError(path, U::Byte, end_header_at, "missing format line");

  std::size_t data_start = pos;
  const PlyElement* vertex = nullptr;
  for (const PlyElement& e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    if (e.has_list) {
      throw ParseError(path, U::Byte, end_header_at, "list property precedes vertex element");
    }
    data_start += e.count * e.stride;
  }
  if (!vertex) throw ParseError(path, U::Byte, end_header_at, "no vertex element");
  if (vertex->has_list) throw ParseError(path, U::Byte, end_header_at, "vertex element has a list property");

  auto prop = [&](const std::string& name) {
    auto it = vertex->props.find(name);
    if (it == vertex->props.end()) {
      throw ParseError(path, U::Byte, end_header_at, "missing vertex property '" + name + "'");
    }
    return it->second;
  };

  std::size_t rest = 0;
  while (vertex->props.count("f_rest_" + std::to_string(rest))) ++rest;
  std::size_t rest_total = 0;
  for (const auto& [name, unused] : vertex->props) {
    if (name.rfind("f_rest_", 0) == 0) ++rest_total;
  }
  if (rest_total != rest) {
    throw ParseError(path, U::Byte, end_header_at, "f_rest properties are not numbered contiguously");
  }
  int degree = -1;
  for (int d = 0; d <= 3; ++d) {
    if (static_cast<std::size_t>(3 * (sh_coeff_count(d) - 1)) == rest) degree = d;
  }
  if (degree < 0) {
    throw ParseError(path, U::Byte, end_header_at,
                     "unsupported SH degree: " + std::to_string(rest) + " f_rest properties");
  }

  const auto px = prop("x"), py = prop("y"), pz = prop("z");
  const std::pair<PlyType, std::size_t> dc[3] = {prop("f_dc_0"), prop("f_dc_1"), prop("f_dc_2")};
  const auto op = prop("opacity");
  const std::pair<PlyType, std::size_t> sc[3] = {prop("scale_0"), prop("scale_1"), prop("scale_2")};
  const std::pair<PlyType, std::size_t> rot[4] = {prop("rot_0"), prop("rot_1"), prop("rot_2"),
                                                  prop("rot_3")};
  std::vector<std::pair<PlyType, std::size_t>> rest_props;
  for (std::size_t k = 0; k < rest; ++k) rest_props.push_back(prop("f_rest_" + std::to_string(k)));

  const std::uint64_t n = vertex->count;
  const std::uint64_t need = n * vertex->stride;
  if (data_start > data.size() || data.size() - data_start < need) {
    throw ParseError(path, U::Byte, data.size(),
                     "truncated vertex data: expected " + std::to_string(need) + " bytes");
  }

  SplatSet s;
  s.sh_degree = degree;
  s.resize(n);
  const int K = sh_coeff_count(degree);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t record = data_start + i * vertex->stride;
    const char* r = data.data() + record;
    auto get = [&](const std::pair<PlyType, std::size_t>& p) { return ply_read(r + p.second, p.first); };
    s.positions[i] = Vec3(get(px), get(py), get(pz));
    s.scales[i] = Vec3(std::exp(get(sc[0])), std::exp(get(sc[1])), std::exp(get(sc[2])));
    s.opacities[i] = sigmoid(get(op));
    Quat q(get(rot[0]), get(rot[1]), get(rot[2]), get(rot[3]));
    const double norm = q.norm();
    if (!(norm >= 1e-8) || !std::isfinite(norm)) {
      throw ParseError(path, U::Byte, record, "quaternion of vertex " + std::to_string(i) +
                                                  " has near-zero norm");
    }
    if (std::abs(norm - 1.0) > 1e-6) {
      // Renormalized values are kept at file precision so a save/load cycle
      // reproduces them exactly.
      q.coeffs() /= norm;
      for (int c = 0; c < 4; ++c) q.coeffs()[c] = static_cast<float>(q.coeffs()[c]);
    }
    s.rotations[i] = q;
    auto sh = s.sh(i);
    for (int c = 0; c < 3; ++c) {
      sh[c * K] = get(dc[c]);
      for (int k = 1; k < K; ++k) sh[c * K + k] = get(rest_props[c * (K - 1) + (k - 1)]);
    }
  }
  return s;
}

void save_splat_ply(const SplatSet& s, const std::string& path) {
  const auto diags = validate_splats(s, "splats");
  if (!diags.empty()) throw InvariantError("refusing to save " + path + ": " + to_string(diags[0]));

  const int K = s.coeffs_per_channel();
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << s.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
    header << "property float " << name << "\n";
  }
  for (int k = 0; k < 3 * (K - 1); ++k) header << "property float f_rest_" << k << "\n";
  for (const char* name : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
    header << "property float " << name << "\n";
  }
  header << "end_header\n";

  std::string out = std::move(header).str();
  const std::size_t floats = 17 + 3 * (K - 1);
  out.reserve(out.size() + s.size() * floats * 4);
  auto put = [&](double v) { append_pod(out, static_cast<float>(v)); };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto sh = s.sh(i);
    put(s.positions[i].x());
    put(s.positions[i].y());
    put(s.positions[i].z());
    put(0.0);
    put(0.0);
    put(0.0);
    for (int c = 0; c < 3; ++c) put(sh[c * K]);
    for (int c = 0; c < 3; ++c) {
      for (int k = 1; k < K; ++k) put(sh[c * K + k]);
    }
    put(logit(s.opacities[i]));
    for (int a = 0; a < 3; ++a) put(std::log(s.scales[i][a]));
    const Quat& q = s.rotations[i];
    put(q.w());
    put(q.x());
    put(q.y());
    put(q.z());
  }
  write_file(path, out);
}

// ---------------------------------------------------------------- OBJ

TriMesh load_obj(const std::string& path, const Rgb& base_color, double mesh_opacity,
                 ObjLoadReport* report) {
  const std::string data = read_file(path);
  using U = ParseError::Unit;
  TriMesh mesh;
  mesh.base_color = base_color;
  mesh.opacity = mesh_opacity;
  std::vector<std::optional<Rgb>> colors;
  bool any_color = false;
  ObjLoadReport rep;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) nl = data.size();
    std::string_view line(data.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;

    if (tok[0] == "v") {
      double vals[7];
      const std::size_t count = tok.size() - 1;
      if (count < 3 || count > 7) throw ParseError(path, U::Line, line_no, "malformed vertex");
      for (std::size_t k = 0; k < count; ++k) {
        if (!parse_number(tok[k + 1], vals[k])) {
          throw ParseError(path, U::Line, line_no, "bad number '" + std::string(tok[k + 1]) + "'");
        }
      }
      mesh.vertices.emplace_back(vals[0], vals[1], vals[2]);
      if (count >= 6) {
        // x y z r g b, or x y z w r g b.
        const std::size_t c0 = count == 7 ? 4 : 3;
        colors.emplace_back(Rgb(vals[c0], vals[c0 + 1], vals[c0 + 2]));
        any_color = true;
      } else {
        colors.emplace_back();
      }
    } else if (tok[0] == "f") {
      if (tok.size() < 4) throw ParseError(path, U::Line, line_no, "face with fewer than 3 vertices");
      std::vector<int> idx;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view ref = tok[k].substr(0, tok[k].find('/'));
        long long i = 0;
        if (!parse_number(ref, i) || i == 0) {
          throw ParseError(path, U::Line, line_no, "bad face index '" + std::string(tok[k]) + "'");
        }
        const long long nv = static_cast<long long>(mesh.vertices.size());
        const long long resolved = i > 0 ? i - 1 : nv + i;
        if (resolved < 0 || resolved >= nv) {
          throw ParseError(path, U::Line, line_no,
                           "face index " + std::to_string(i) + " out of range (" +
                               std::to_string(nv) + " vertices)");
        }
        idx.push_back(static_cast<int>(resolved));
      }
      if (idx.size() > 3) ++rep.polygons_fanned;
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        const Face f{idx[0], idx[k], idx[k + 1]};
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
          ++rep.degenerate_faces_dropped;
          continue;
        }
        mesh.faces.push_back(f);
      }
    }
    // vt, vn, o, g, s, usemtl, mtllib and anything else carry nothing we use.
  }
  if (any_color) {
    mesh.vertex_colors.reserve(colors.size());
    for (const auto& c : colors) mesh.vertex_colors.push_back(c.value_or(base_color));
  }
  if (report) *report = rep;
  return mesh;
}

void write_obj(const TriMesh& mesh, const std::string& path) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z();
    if (mesh.has_vertex_colors()) {
      const Rgb& c = mesh.vertex_colors[i];
      out << ' ' << c.x() << ' ' << c.y() << ' ' << c.z();
    }
    out << '\n';
  }
  for (const Face& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  write_file(path, std::move(out).str());
}

// ---------------------------------------------------------------- cameras

namespace {

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, ParseError::Unit::Byte, e.byte, e.what());
  }
}

Vec3 vec3_of(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw InputError(what + ": expected an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

std::vector<Camera> parse_cameras_json(const std::string& text, const std::string& source) {
  const json root = parse_json(text, source);
  try {
    if (!root.is_object() || !root.contains("frames") || !root["frames"].is_array()) {
      throw InputError(source + ": missing 'frames' array");
    }
    std::vector<Camera> cams;
    const json& frames = root["frames"];
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const json& fr = frames[i];
      std::string name = "frame " + std::to_string(i);
      if (fr.contains("file_path") && fr["file_path"].is_string()) {
        name += " (" + fr["file_path"].get<std::string>() + ")";
      }
      auto lookup = [&](const char* key) -> std::optional<double> {
        if (fr.contains(key)) return fr[key].get<double>();
        if (root.contains(key)) return root[key].get<double>();
        return std::nullopt;
      };

      Camera cam;
      cam.width = static_cast<int>(lookup("w").value_or(800.0));
      cam.height = static_cast<int>(lookup("h").value_or(800.0));
      if (auto fl = lookup("fl_x")) {
        cam.fx = *fl;
      } else if (auto angle = lookup("camera_angle_x")) {
        cam.fx = cam.width / (2.0 * std::tan(0.5 * *angle));
      } else {
        throw InputError(source + ": " + name + " has neither fl_x nor camera_angle_x");
      }
      cam.fy = lookup("fl_y").value_or(cam.fx);
      cam.cx = lookup("cx").value_or(0.5 * cam.width);
      cam.cy = lookup("cy").value_or(0.5 * cam.height);
      cam.near = lookup("near").value_or(cam.near);
      cam.far = lookup("far").value_or(cam.far);

      if (!fr.contains("transform_matrix")) throw InputError(source + ": " + name + " has no transform_matrix");
      const json& m = fr["transform_matrix"];
      if (!m.is_array() || m.size() < 3) throw InputError(source + ": " + name + " transform_matrix is not 4x4");
      Eigen::Matrix4d c2w = Eigen::Matrix4d::Identity();
      for (int r = 0; r < static_cast<int>(std::min<std::size_t>(m.size(), 4)); ++r) {
        if (!m[r].is_array() || m[r].size() != 4) {
          throw InputError(source + ": " + name + " transform_matrix is not 4x4");
        }
        for (int c = 0; c < 4; ++c) c2w(r, c) = m[r][c].get<double>();
      }
      // OpenGL camera axes (x right, y up, -z forward) to (x right, y down, z forward).
      const Eigen::Matrix4d flip = Eigen::Vector4d(1.0, -1.0, -1.0, 1.0).asDiagonal();
      const Eigen::Matrix4d c2w_cv = c2w * flip;
      Eigen::Matrix4d w2c;
      bool invertible = false;
      double det = 0.0;
      c2w_cv.computeInverseAndDetWithCheck(w2c, det, invertible, 1e-12);
      if (!invertible || !c2w_cv.allFinite() || !w2c.allFinite()) {
        throw InputError(source + ": " + name + " camera-to-world matrix is not invertible");
      }
      cam.rotation = w2c.topLeftCorner<3, 3>();
      cam.translation = w2c.topRightCorner<3, 1>();
      cams.push_back(cam);
    }
    return cams;
  } catch (const json::exception& e) {
    throw InputError(source + ": " + e.what());
  }
}

std::vector<Camera> load_cameras_json(const std::string& path) {
  return parse_cameras_json(read_file(path), path);
}

// ---------------------------------------------------------------- scene config

Camera SceneConfig::make_camera() const {
  const CameraSpec spec = camera.value_or(CameraSpec{});
  Camera cam = Camera::look_at(spec.eye, spec.target, spec.up, spec.fov_y_deg * M_PI / 180.0, width,
                               height);
  cam.near = spec.near;
  cam.far = spec.far;
  return cam;
}

SceneConfig load_scene_config(const std::string& path) {
  const json root = parse_json(read_file(path), path);
  const fs::path base = fs::path(path).parent_path();
  SceneConfig cfg;
  try {
    if (!root.is_object()) throw InputError(path + ": scene config must be a JSON object");
    if (root.contains("objects")) {
      const json& objects = root["objects"];
      for (std::size_t i = 0; i < objects.size(); ++i) {
        const json& o = objects[i];
        const std::string where = path + ": objects[" + std::to_string(i) + "]";
        const std::string type = o.value("type", "");
        if (!o.contains("path")) throw InputError(where + " has no path");
        const std::string asset = (base / o["path"].get<std::string>()).lexically_normal().string();
        if (!fs::exists(asset)) throw IoError(asset, "asset not found (" + where + ")");

        Placement placement;
        if (o.contains("translation")) placement.translation = vec3_of(o["translation"], where + ".translation");
        if (o.contains("rotation_quat")) {
          const json& q = o["rotation_quat"];
          if (!q.is_array() || q.size() != 4) throw InputError(where + ".rotation_quat: expected [w,x,y,z]");
          Quat rq(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
          if (!(rq.norm() > 1e-8)) throw InputError(where + ".rotation_quat has zero norm");
          placement.rotation = rq.normalized();
        }
        placement.scale = o.value("scale", 1.0);

        if (type == "splat") {
          cfg.scene.splat_objects.push_back({load_splat_ply(asset), placement});
        } else if (type == "mesh") {
          const Rgb color = o.contains("color") ? vec3_of(o["color"], where + ".color") : Rgb(0.8, 0.8, 0.8);
          const double opacity = o.value("opacity", 1.0);
          cfg.scene.mesh_objects.push_back({load_obj(asset, color, opacity), placement});
        } else {
          throw InputError(where + ": type must be \"splat\" or \"mesh\"");
        }
      }
    }
    if (root.contains("background")) {
      const json& bg = root["background"];
      if (bg.contains("color")) cfg.scene.background_color = vec3_of(bg["color"], path + ": background.color");
      cfg.scene.background_opacity = bg.value("opacity", cfg.scene.background_opacity);
    }
    if (root.contains("render")) {
      const json& r = root["render"];
      RenderSettings& s = cfg.settings;
      s.msaa_samples = r.value("msaa", s.msaa_samples);
      if (r.contains("mode")) s.blend_mode = parse_blend_mode(r["mode"].get<std::string>());
      cfg.width = r.value("width", cfg.width);
      cfg.height = r.value("height", cfg.height);
      s.alpha_cutoff = r.value("alpha_cutoff", s.alpha_cutoff);
      s.termination_threshold = r.value("termination_threshold", s.termination_threshold);
      s.gaussian_dilation = r.value("dilation", s.gaussian_dilation);
    }
    if (root.contains("camera")) {
      const json& c = root["camera"];
      CameraSpec spec;
      if (c.contains("eye")) spec.eye = vec3_of(c["eye"], path + ": camera.eye");
      if (c.contains("target")) spec.target = vec3_of(c["target"], path + ": camera.target");
      if (c.contains("up")) spec.up = vec3_of(c["up"], path + ": camera.up");
      spec.fov_y_deg = c.value("fov_y_deg", spec.fov_y_deg);
      spec.near = c.value("near", spec.near);
      spec.far = c.value("far", spec.far);
      cfg.camera = spec;
    }
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (cfg.width <= 0 || cfg.height <= 0) throw InputError(path + ": render size must be positive");
  auto diags = validate_scene(cfg.scene);
  const auto sdiags = validate_settings(cfg.settings);
  diags.insert(diags.end(), sdiags.begin(), sdiags.end());
  if (!diags.empty()) throw InvariantError(path + ": " + to_string(diags[0]));
  return cfg;
}

// ---------------------------------------------------------------- binding tables

namespace {
constexpr char kBindingMagic[5] = {'U', 'G', 'S', 'B', '1'};
constexpr std::size_t kBindingRecordSize = 4 + 1 + 3 * 8 + 3 * 8;

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}
}  // namespace

void save_binding(const BindingTable& table, const std::string& path) {
  const auto problems = validate_binding(table);
  if (!problems.empty()) {
    throw InvariantError("refusing to save binding table " + path + ": " + problems[0]);
  }
  const json header = {{"mode", to_string(table.mode)},
                       {"gaussian_count", table.gaussian_count},
                       {"anchors_per_gaussian", table.anchors_per_gaussian()},
                       {"mesh_face_count", table.mesh_face_count},
                       {"mesh_hash", hex16(table.mesh_hash)},
                       {"k_sigma", table.k_sigma},
                       {"record_size", kBindingRecordSize}};
  const std::string text = header.dump();
  std::string out(kBindingMagic, sizeof(kBindingMagic));
  append_pod(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + table.anchors.size() * kBindingRecordSize);
  for (const Anchor& a : table.anchors) {
    append_pod(out, static_cast<std::int32_t>(a.face));
    append_pod(out, static_cast<std::uint8_t>(a.fallback ? 1 : 0));
    for (double v : {a.u, a.v, a.w, a.corner_offset.x(), a.corner_offset.y(), a.corner_offset.z()}) {
      append_pod(out, v);
    }
  }
  write_file(path, out);
}

BindingTable load_binding(const std::string& path) {
  const std::string data = read_file(path);
  using U = ParseError::Unit;
  if (data.size() < 9 || std::memcmp(data.data(), kBindingMagic, sizeof(kBindingMagic)) != 0) {
    throw ParseError(path, U::Byte, 0, "not a binding file (bad magic)");
  }
  const std::uint32_t header_len = read_pod<std::uint32_t>(data.data() + 5);
  if (data.size() - 9 < header_len) throw ParseError(path, U::Byte, 9, "truncated header");

  BindingTable table;
  try {
    const json h = json::parse(data.substr(9, header_len));
    table.mode = parse_bind_mode(h.at("mode").get<std::string>());
    table.gaussian_count = h.at("gaussian_count").get<std::uint64_t>();
    table.mesh_face_count = h.at("mesh_face_count").get<std::uint32_t>();
    table.k_sigma = h.value("k_sigma", 3.0);
    const std::string hash = h.at("mesh_hash").get<std::string>();
    std::uint64_t hv = 0;
    const auto res = std::from_chars(hash.data(), hash.data() + hash.size(), hv, 16);
    if (hash.size() != 16 || res.ec != std::errc() || res.ptr != hash.data() + hash.size()) {
      throw ParseError(path, U::Byte, 9, "malformed mesh_hash");
    }
    table.mesh_hash = hv;
    if (h.at("record_size").get<std::size_t>() != kBindingRecordSize) {
      throw ParseError(path, U::Byte, 9, "unsupported record size");
    }
    if (h.contains("anchors_per_gaussian") &&
        h["anchors_per_gaussian"].get<int>() != table.anchors_per_gaussian()) {
      throw ParseError(path, U::Byte, 9, "anchors_per_gaussian does not match mode");
    }
  } catch (const json::exception& e) {
    throw ParseError(path, U::Byte, 9, std::string("bad header: ") + e.what());
  }

  const std::size_t start = 9 + header_len;
  const std::uint64_t count = table.gaussian_count * table.anchors_per_gaussian();
  if ((data.size() - start) / kBindingRecordSize < count) {
    throw ParseError(path, U::Byte, data.size(),
                     "truncated records: expected " + std::to_string(count));
  }
  table.anchors.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const char* r = data.data() + start + i * kBindingRecordSize;
    Anchor& a = table.anchors[i];
    a.face = read_pod<std::int32_t>(r);
    a.fallback = read_pod<std::uint8_t>(r + 4) != 0;
    a.u = read_pod<double>(r + 5);
    a.v = read_pod<double>(r + 13);
    a.w = read_pod<double>(r + 21);
    a.corner_offset = Vec3(read_pod<double>(r + 29), read_pod<double>(r + 37), read_pod<double>(r + 45));
  }
  const auto problems = validate_binding(table);
  if (!problems.empty()) throw InvariantError(path + ": " + problems[0]);
  return table;
}

// ---------------------------------------------------------------- images

double linear_to_srgb(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_to_linear(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

void write_png(const Image& image, const std::string& path) {
  std::vector<std::uint8_t> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double s = linear_to_srgb(std::isfinite(image.data[i]) ? image.data[i] : 0.0);
    bytes[i] = static_cast<std::uint8_t>(std::lround(s * 255.0));
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError(path, "PNG write failed: " + msg);
  }
}

Image read_png(const std::string& path) {
  if (!fs::exists(path)) throw IoError(path, "file not found");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError(path, std::string("PNG read failed: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError(path, "PNG read failed: " + msg);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = srgb_to_linear(bytes[i] / 255.0);
  return out;
}

void write_pfm(const Image& image, const std::string& path) {
  std::string out = "PF\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n-1.0\n";
  for (int y = image.height - 1; y >= 0; --y) {
    for (int x = 0; x < image.width; ++x) {
      const Rgb c = image.at(x, y);
      for (int k = 0; k < 3; ++k) append_pod(out, static_cast<float>(c[k]));
    }
  }
  write_file(path, out);
}

Image read_pfm(const std::string& path) {
  const std::string data = read_file(path);
  using U = ParseError::Unit;
  std::istringstream in(data);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  if (!(in >> magic >> w >> h >> scale) || magic != "PF" || w <= 0 || h <= 0) {
    throw ParseError(path, U::Byte, 0, "malformed PFM header");
  }
  if (scale > 0) throw ParseError(path, U::Byte, 0, "big-endian PFM is not supported");
  const std::size_t start = static_cast<std::size_t>(in.tellg()) + 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * 12;
  if (start > data.size() || data.size() - start < need) {
    throw ParseError(path, U::Byte, data.size(), "truncated PFM data");
  }
  Image img(w, h);
  const char* p = data.data() + start;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      img.set(x, y, Rgb(read_pod<float>(p), read_pod<float>(p + 4), read_pod<float>(p + 8)));
      p += 12;
    }
  }
  return img;
}

namespace {
std::string lower_extension(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}
}  // namespace

void write_image(const Image& image, const std::string& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".pfm") return write_pfm(image, path);
  if (ext == ".png") return write_png(image, path);
  throw InputError(path + ": unsupported image extension (use .png or .pfm)");
}

Image read_image(const std::string& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return read_png(path);
  throw InputError(path + ": unsupported image extension (use .png or .pfm)");
}

}  // namespace unigs
