#pragma once

#include <array>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "unigs/binding_table.hpp"
#include "unigs/core.hpp"
#include "unigs/parallel.hpp"
#include "unigs/splat_projection.hpp"

namespace unigs {

struct RayHit {
  int face = -1;
  double u = 0, v = 0, w = 0;  // weights of the face's vertices 0, 1, 2
  Vec3 point = Vec3::Zero();
  double t = 0;  // distance along the normalized ray
};

inline constexpr double kRayDetEpsilon = 1e-9;
inline constexpr double kRayMinT = 1e-6;

// Moller-Trumbore. `dir` must be unit length.
std::optional<RayHit> intersect_triangle(const Vec3& a, const Vec3& b, const Vec3& c,
                                         const Vec3& origin, const Vec3& dir, int face);

// Nearest hit wins; equal distances go to the lower face index.
inline bool hit_before(const RayHit& a, const RayHit& b) {
  return a.t < b.t || (a.t == b.t && a.face < b.face);
}

struct SurfacePoint {
  int face = -1;
  double u = 1, v = 0, w = 0;
  Vec3 point = Vec3::Zero();
  double distance = 0;
};

SurfacePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c, int face);

inline bool surface_point_before(const SurfacePoint& a, const SurfacePoint& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.face < b.face);
}

struct Aabb {
  Vec3 lo = Vec3::Constant(1e300);
  Vec3 hi = Vec3::Constant(-1e300);

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  double squared_distance(const Vec3& p) const;
  // Entry distance of the ray into the box, or nullopt if it misses or the
  // entry lies beyond max_t.
  std::optional<double> ray_entry(const Vec3& origin, const Vec3& dir, double max_t) const;
};

// Binary BVH over mesh faces, median split on the longest centroid axis,
// at most four faces per leaf.
class Bvh {
 public:
  static constexpr int kLeafSize = 4;

  struct Node {
    Aabb box;
    int left = -1;
    int right = -1;
    int first = 0;  // into triangle_order()
    int count = 0;  // > 0 for leaves
    bool is_leaf() const { return count > 0; }
  };

  static Bvh build(const TriMesh& mesh);

  std::optional<RayHit> ray_cast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir) const;
  SurfacePoint nearest_point(const TriMesh& mesh, const Vec3& p) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& triangle_order() const { return order_; }
  int depth() const;

 private:
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

struct GaussianCorners {
  std::array<Vec3, 8> world;
  std::array<Vec3, 8> local;  // (+-k s1, +-k s2, +-k s3), bit i of the index picks the sign of axis i
};

GaussianCorners gaussian_corners(const GaussianParams& g, double k_sigma = 3.0);

// Binds every Gaussian to the proxy mesh by casting rays from each camera
// center toward the Gaussian center (Center) or the eight corners of its
// k_sigma oriented box (Bbx8). Per target, the hit closest to the Gaussian
// center across all cameras is kept.
BindingTable bind(const SplatSet& splats, const TriMesh& mesh, std::span<const Camera> cameras,
                  BindMode mode, double k_sigma = 3.0);

namespace detail {

// The selection rule shared by the BVH binder and the exhaustive reference.
// cast(origin, unit_dir) -> optional<RayHit>; nearest(point) -> SurfacePoint.
template <class Cast, class Nearest>
BindingTable bind_with(const SplatSet& splats, const TriMesh& mesh,
                       std::span<const Camera> cameras, BindMode mode, double k_sigma,
                       const Cast& cast, const Nearest& nearest) {
  BindingTable table;
  table.mode = mode;
  table.gaussian_count = splats.size();
  table.mesh_face_count = static_cast<std::uint32_t>(mesh.face_count());
  table.mesh_hash = mesh.content_hash();
  table.k_sigma = k_sigma;
  const int per = anchors_per_gaussian(mode);
  table.anchors.resize(splats.size() * per);

  std::vector<Vec3> origins;
  for (const Camera& c : cameras) origins.push_back(c.center());

  parallel_for(static_cast<std::int64_t>(splats.size()), [&](std::int64_t g) {
    const GaussianParams params = gaussian_at(splats, g);
    std::array<Vec3, 8> targets{};
    std::array<Vec3, 8> offsets{};
    if (mode == BindMode::Center) {
      targets[0] = params.position;
      offsets[0] = Vec3::Zero();
    } else {
      const GaussianCorners corners = gaussian_corners(params, k_sigma);
      targets = corners.world;
      offsets = corners.local;
    }
    for (int k = 0; k < per; ++k) {
      std::optional<RayHit> best;
      double best_dist = 0.0;
      for (std::size_t c = 0; c < cameras.size(); ++c) {
        if (!(cameras[c].to_camera(targets[k]).z() > 0.0)) continue;
        const Vec3 delta = targets[k] - origins[c];
        const double len = delta.norm();
        if (!(len > 0.0)) continue;
        const std::optional<RayHit> hit = cast(origins[c], Vec3(delta / len));
        if (!hit) continue;
        const double dist = (hit->point - params.position).norm();
        if (!best || std::tie(dist, hit->face, hit->u, hit->v) <
                         std::tie(best_dist, best->face, best->u, best->v)) {
          best = hit;
          best_dist = dist;
        }
      }
      Anchor& a = table.anchors[g * per + k];
      a.corner_offset = offsets[k];
      if (best) {
        a.face = best->face;
        a.fallback = false;
        a.u = best->u;
        a.v = best->v;
        a.w = best->w;
      } else {
        const SurfacePoint sp = nearest(targets[k]);
        a.face = sp.face;
        a.fallback = true;
        a.u = sp.u;
        a.v = sp.v;
        a.w = sp.w;
      }
    }
  });
  return table;
}

}  // namespace detail

}  // namespace unigs
