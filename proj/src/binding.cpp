#include "unigs/binding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unigs/error.hpp"

namespace unigs {

const char* to_string(BindMode mode) { return mode == BindMode::Center ? "center" : "bbx8"; }

BindMode parse_bind_mode(const std::string& name) {
  if (name == "center") return BindMode::Center;
  if (name == "bbx8") return BindMode::Bbx8;
  throw InputError("unknown bind mode '" + name + "' (expected center or bbx8)");
}

std::size_t BindingTable::fallback_count() const {
  return static_cast<std::size_t>(
      std::count_if(anchors.begin(), anchors.end(), [](const Anchor& a) { return a.fallback; }));
}

std::vector<std::string> validate_binding(const BindingTable& table) {
  std::vector<std::string> out;
  const std::size_t expected = table.gaussian_count * table.anchors_per_gaussian();
  if (table.anchors.size() != expected) {
    out.push_back("anchor count " + std::to_string(table.anchors.size()) + " != expected " +
                  std::to_string(expected));
  }
  for (std::size_t i = 0; i < table.anchors.size(); ++i) {
    const Anchor& a = table.anchors[i];
    const std::string at = "anchor " + std::to_string(i) + ": ";
    if (a.face < 0 || static_cast<std::uint32_t>(a.face) >= table.mesh_face_count) {
      out.push_back(at + "face index out of range");
    }
    const double lo = -1e-9, hi = 1.0 + 1e-9;
    if (!(a.u >= lo && a.u <= hi && a.v >= lo && a.v <= hi && a.w >= lo && a.w <= hi)) {
      out.push_back(at + "barycentric outside [0,1]");
    }
    if (!(std::abs(a.u + a.v + a.w - 1.0) <= 1e-6)) {
      out.push_back(at + "barycentrics do not sum to 1");
    }
    if (!a.corner_offset.allFinite()) out.push_back(at + "non-finite corner offset");
  }
  return out;
}

Vec3 anchor_point(const Anchor& a, const TriMesh& mesh) {
  const Face& f = mesh.faces.at(static_cast<std::size_t>(a.face));
  return a.u * mesh.vertices[f[0]] + a.v * mesh.vertices[f[1]] + a.w * mesh.vertices[f[2]];
}

std::optional<RayHit> intersect_triangle(const Vec3& a, const Vec3& b, const Vec3& c,
                                         const Vec3& origin, const Vec3& dir, int face) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kRayDetEpsilon) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = origin - a;
  const double b1 = s.dot(pvec) * inv_det;
  if (b1 < 0.0 || b1 > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double b2 = dir.dot(q) * inv_det;
  if (b2 < 0.0 || b1 + b2 > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv_det;
  if (!(t > kRayMinT)) return std::nullopt;
  RayHit hit;
  hit.face = face;
  hit.u = 1.0 - b1 - b2;
  hit.v = b1;
  hit.w = b2;
  hit.point = hit.u * a + hit.v * b + hit.w * c;
  hit.t = t;
  return hit;
}

SurfacePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c, int face) {
  SurfacePoint sp;
  sp.face = face;
  auto finish = [&](double u, double v, double w) {
    sp.u = u;
    sp.v = v;
    sp.w = w;
    sp.point = u * a + v * b + w * c;
    sp.distance = (p - sp.point).norm();
    return sp;
  };

  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return finish(1, 0, 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(0, 1, 0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return finish(1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(0, 0, 1);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return finish(1 - w, 0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(0, 1 - w, w);
  }

  const double sum = va + vb + vc;
  if (!(sum > 0.0)) {
    // Collinear face: take the best vertex.
    SurfacePoint best = finish(1, 0, 0);
    SurfacePoint other = finish(0, 1, 0);
    if (other.distance < best.distance) best = other;
    other = finish(0, 0, 1);
    if (other.distance < best.distance) best = other;
    return best;
  }
  const double v = vb / sum;
  const double w = vc / sum;
  return finish(1 - v - w, v, w);
}

double Aabb::squared_distance(const Vec3& p) const {
  double d2 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = std::max({lo[i] - p[i], 0.0, p[i] - hi[i]});
    d2 += d * d;
  }
  return d2;
}

std::optional<double> Aabb::ray_entry(const Vec3& origin, const Vec3& dir, double max_t) const {
  double tmin = 0.0;
  double tmax = max_t;
  for (int i = 0; i < 3; ++i) {
    if (dir[i] == 0.0) {
      if (origin[i] < lo[i] || origin[i] > hi[i]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / dir[i];
    double t0 = (lo[i] - origin[i]) * inv;
    double t1 = (hi[i] - origin[i]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  return tmin;
}

namespace {

struct BuildContext {
  const TriMesh& mesh;
  std::vector<Vec3> centroids;
  std::vector<int>& order;
  std::vector<Bvh::Node>& nodes;
};

Aabb padded(Aabb box) {
  const double pad = 1e-9 * (box.hi - box.lo).maxCoeff() + 1e-12;
  box.lo.array() -= pad;
  box.hi.array() += pad;
  return box;
}

int build_node(BuildContext& ctx, int first, int last) {
  const int index = static_cast<int>(ctx.nodes.size());
  ctx.nodes.emplace_back();
  Aabb box;
  Aabb centroid_box;
  for (int i = first; i < last; ++i) {
    const Face& f = ctx.mesh.faces[ctx.order[i]];
    for (int k : f) box.extend(ctx.mesh.vertices[k]);
    centroid_box.extend(ctx.centroids[ctx.order[i]]);
  }
  ctx.nodes[index].box = padded(box);

  if (last - first <= Bvh::kLeafSize) {
    ctx.nodes[index].first = first;
    ctx.nodes[index].count = last - first;
    return index;
  }
  int axis = 0;
  const Vec3 extent = centroid_box.hi - centroid_box.lo;
  if (extent.y() > extent[axis]) axis = 1;
  if (extent.z() > extent[axis]) axis = 2;
  const int mid = first + (last - first) / 2;
  std::nth_element(ctx.order.begin() + first, ctx.order.begin() + mid, ctx.order.begin() + last,
                   [&](int a, int b) {
                     const double ca = ctx.centroids[a][axis], cb = ctx.centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build_node(ctx, first, mid);
  const int right = build_node(ctx, mid, last);
  ctx.nodes[index].left = left;
  ctx.nodes[index].right = right;
  return index;
}

int subtree_depth(const std::vector<Bvh::Node>& nodes, int i) {
  if (nodes[i].is_leaf()) return 1;
  return 1 + std::max(subtree_depth(nodes, nodes[i].left), subtree_depth(nodes, nodes[i].right));
}

}  // namespace

Bvh Bvh::build(const TriMesh& mesh) {
  if (mesh.faces.empty()) throw InputError("cannot build a BVH over an empty mesh");
  Bvh bvh;
  bvh.order_.resize(mesh.face_count());
  for (std::size_t i = 0; i < mesh.face_count(); ++i) bvh.order_[i] = static_cast<int>(i);
  BuildContext ctx{mesh, {}, bvh.order_, bvh.nodes_};
  ctx.centroids.reserve(mesh.face_count());
  for (const Face& f : mesh.faces) {
    ctx.centroids.push_back((mesh.vertices[f[0]] + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0);
  }
  bvh.nodes_.reserve(2 * mesh.face_count() / kLeafSize + 1);
  build_node(ctx, 0, static_cast<int>(mesh.face_count()));
  return bvh;
}

int Bvh::depth() const { return nodes_.empty() ? 0 : subtree_depth(nodes_, 0); }

std::optional<RayHit> Bvh::ray_cast(const TriMesh& mesh, const Vec3& origin,
                                    const Vec3& direction) const {
  const double len = direction.norm();
  if (!(len > 0.0)) return std::nullopt;
  const Vec3 dir = direction / len;

  std::optional<RayHit> best;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  if (nodes_.empty() || !nodes_[0].box.ray_entry(origin, dir, kInf)) return std::nullopt;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    const double max_t = best ? best->t : kInf;
    if (!node.box.ray_entry(origin, dir, max_t)) continue;
    if (node.is_leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int face = order_[i];
        const Face& f = mesh.faces[face];
        auto hit = intersect_triangle(mesh.vertices[f[0]], mesh.vertices[f[1]],
                                      mesh.vertices[f[2]], origin, dir, face);
        if (hit && (!best || hit_before(*hit, *best))) best = hit;
      }
      continue;
    }
    const auto tl = nodes_[node.left].box.ray_entry(origin, dir, max_t);
    const auto tr = nodes_[node.right].box.ray_entry(origin, dir, max_t);
    if (tl && tr) {
      // Visit the nearer child first.
      if (*tl <= *tr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    } else if (tl) {
      stack[top++] = node.left;
    } else if (tr) {
      stack[top++] = node.right;
    }
  }
  return best;
}

SurfacePoint Bvh::nearest_point(const TriMesh& mesh, const Vec3& p) const {
  SurfacePoint best;
  best.distance = std::numeric_limits<double>::infinity();
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squared_distance(p) > best.distance * best.distance) continue;
    if (node.is_leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int face = order_[i];
        const Face& f = mesh.faces[face];
        const SurfacePoint sp = closest_point_on_triangle(p, mesh.vertices[f[0]],
                                                          mesh.vertices[f[1]],
                                                          mesh.vertices[f[2]], face);
        if (best.face < 0 || surface_point_before(sp, best)) best = sp;
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squared_distance(p);
    const double dr = nodes_[node.right].box.squared_distance(p);
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

GaussianCorners gaussian_corners(const GaussianParams& g, double k_sigma) {
  GaussianCorners out;
  const Mat3 r = g.rotation.normalized().toRotationMatrix();
  for (int i = 0; i < 8; ++i) {
    const Vec3 sign((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out.local[i] = k_sigma * sign.cwiseProduct(g.scale);
    out.world[i] = g.position + r * out.local[i];
  }
  return out;
}

BindingTable bind(const SplatSet& splats, const TriMesh& mesh, std::span<const Camera> cameras,
                  BindMode mode, double k_sigma) {
  if (cameras.empty()) throw InputError("binding requires at least one camera");
  if (!(k_sigma > 0.0)) throw InputError("k_sigma must be positive");
  const Bvh bvh = Bvh::build(mesh);
  return detail::bind_with(
      splats, mesh, cameras, mode, k_sigma,
      [&](const Vec3& o, const Vec3& d) { return bvh.ray_cast(mesh, o, d); },
      [&](const Vec3& p) { return bvh.nearest_point(mesh, p); });
}

}  // namespace unigs
