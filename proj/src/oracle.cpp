#include "unigs/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "unigs/error.hpp"
#include "unigs/parallel.hpp"
#include "unigs/splat_projection.hpp"

namespace unigs::oracle {

OracleImage supersample_render(const Scene& scene, const Camera& camera, int samples_per_axis,
                               const RenderSettings& settings) {
  if (samples_per_axis < 1) throw ContractViolation("samples_per_axis must be positive");
  const PreparedView view = prepare_view(scene, camera, settings);
  const int s = samples_per_axis;
  const double inv_count = 1.0 / (static_cast<double>(s) * s);
  const double cutoff = settings.alpha_cutoff;
  const double threshold = settings.termination_threshold;
  constexpr int ts = PreparedView::kTileSize;

  OracleImage out;
  out.samples_per_axis = s;
  out.pixels = Image(camera.width, camera.height);

  parallel_for(camera.height, [&](std::int64_t row) {
    const int y = static_cast<int>(row);
    std::vector<const ProjectedSplat*> splats;
    std::vector<std::uint32_t> splat_orders;
    std::vector<const ScreenTriangle*> tris;
    std::vector<Fragment> frags;
    for (int x = 0; x < camera.width; ++x) {
      const int tile = (y / ts) * view.tiles_x + x / ts;
      // Candidates whose support can reach any point of this pixel.
      splats.clear();
      splat_orders.clear();
      for (std::uint32_t idx : view.tile_splats[tile]) {
        const ProjectedSplat& p = view.splats[idx];
        if (std::abs(x + 0.5 - p.mean2d.x()) <= p.screen_radius + 0.5 &&
            std::abs(y + 0.5 - p.mean2d.y()) <= p.screen_radius + 0.5) {
          splats.push_back(&p);
          splat_orders.push_back(view.splat_order[idx]);
        }
      }
      tris.clear();
      for (std::uint32_t idx : view.tile_triangles[tile]) {
        const ScreenTriangle& t = view.triangles[idx];
        if (x >= t.x0 && x <= t.x1 && y >= t.y0 && y <= t.y1) tris.push_back(&t);
      }

      Rgb sum = Rgb::Zero();
      for (int b = 0; b < s; ++b) {
        for (int a = 0; a < s; ++a) {
          const Vec2 p(x + (a + 0.5) / s, y + (b + 0.5) / s);
          frags.clear();
          for (std::size_t i = 0; i < splats.size(); ++i) {
            if (!in_footprint(*splats[i], p)) continue;
            const double alpha = eval_fragment_alpha(*splats[i], p);
            if (alpha < cutoff) continue;
            frags.push_back(Fragment::gaussian(splats[i]->depth, alpha, splats[i]->color, splat_orders[i]));
          }
          for (const ScreenTriangle* t : tris) {
            if (!t->covers(p)) continue;
            frags.push_back(Fragment::triangle(t->depth_at(p, camera), 1, t->alpha,
                                               t->color_at(p, camera), t->order));
          }
          std::sort(frags.begin(), frags.end(), fragment_before);
          double trans = 1.0;
          Rgb c = Rgb::Zero();
          for (const Fragment& f : frags) {
            const double w = trans * f.alpha;
            c += w * f.color;
            trans *= 1.0 - f.alpha;
            if (trans < threshold) break;
          }
          const double w_bg = trans * view.background.opacity;
          c += w_bg * view.background.color;
          sum += c;
        }
      }
      out.pixels.set(x, y, sum * inv_count);
    }
  });
  return out;
}

EntityBlend per_sample_entity_blend(std::span<const Fragment> fragments, int samples) {
  if (samples < 1 || samples > 64) throw ContractViolation("sample count must be in [1, 64]");
  EntityBlend out;
  out.exit_t.assign(samples, 1.0);
  for (const Fragment& f : fragments) {
    if (f.is_triangle() && f.coverage == 0) {
      throw ContractViolation("triangle fragment covers no sample");
    }
    if (!f.is_triangle()) throw ContractViolation("entity blend given a gaussian fragment");
  }
  for (int j = 0; j < samples; ++j) {
    double t = 1.0;
    Rgb c = Rgb::Zero();
    for (const Fragment& f : fragments) {
      if (!(f.coverage >> j & 1u)) continue;
      c += t * f.alpha * f.color;
      t *= 1.0 - f.alpha;
    }
    out.color += c;
    out.exit_t[j] = t;
  }
  out.color /= samples;
  return out;
}

BlendResult per_sample_blend(std::span<const Fragment> fragments, int samples,
                             const Background& background) {
  if (samples < 1 || samples > 64) throw ContractViolation("sample count must be in [1, 64]");
  BlendResult out;
  out.transmittance = 0.0;
  for (int j = 0; j < samples; ++j) {
    double t = 1.0;
    Rgb c = Rgb::Zero();
    double weights = 0.0;
    for (const Fragment& f : fragments) {
      if (f.is_triangle() && !(f.coverage >> j & 1u)) continue;
      c += t * f.alpha * f.color;
      weights += t * f.alpha;
      t *= 1.0 - f.alpha;
    }
    c += t * background.opacity * background.color;
    weights += t * background.opacity;
    out.color += c;
    out.transmittance += t;
    out.weight_sum += weights;
  }
  out.color /= samples;
  out.transmittance /= samples;
  out.weight_sum /= samples;
  return out;
}

BlendResult plain_alpha_blend(std::span<const Fragment> fragments, const Background& background) {
  BlendResult out;
  double t = 1.0;
  for (const Fragment& f : fragments) {
    out.color += t * f.alpha * f.color;
    out.weight_sum += t * f.alpha;
    t *= 1.0 - f.alpha;
  }
  out.color += t * background.opacity * background.color;
  out.weight_sum += t * background.opacity;
  out.transmittance = t;
  return out;
}

Image reference_splat_render(const Scene& scene, const Camera& camera,
                             const RenderSettings& settings) {
  struct Entry {
    double depth;
    std::uint32_t order;
    double alpha;
    Rgb color;
  };
  std::vector<ProjectedSplat> splats;
  std::vector<std::uint32_t> orders;
  const Vec3 eye = camera.center();
  std::uint32_t base = 0;
  for (const SplatObject& obj : scene.splat_objects) {
    const SplatSet world = transform_splats(obj.splats, obj.placement);
    for (std::size_t i = 0; i < world.size(); ++i) {
      auto p = project_splat(gaussian_at(world, i), camera, settings.gaussian_dilation);
      if (!p) continue;
      p->color = eval_sh_color(world.sh(i), world.sh_degree, (world.positions[i] - eye).normalized());
      splats.push_back(*p);
      orders.push_back(base + static_cast<std::uint32_t>(i));
    }
    base += static_cast<std::uint32_t>(world.size());
  }

  constexpr int kBand = 8;
  const int bands = (camera.height + kBand - 1) / kBand;
  std::vector<std::vector<std::uint32_t>> band_splats(bands);
  for (std::uint32_t i = 0; i < splats.size(); ++i) {
    const double lo = splats[i].mean2d.y() - splats[i].screen_radius - 1.0;
    const double hi = splats[i].mean2d.y() + splats[i].screen_radius + 1.0;
    const int b0 = std::max(0, static_cast<int>(std::floor(std::max(lo, -1.0) / kBand)));
    const int b1 = std::min(bands - 1, static_cast<int>(std::floor(std::min(hi, 1e9) / kBand)));
    for (int b = b0; b <= b1; ++b) band_splats[b].push_back(i);
  }

  const Background bg{scene.background_color, scene.background_opacity};
  Image image(camera.width, camera.height);
  parallel_for(bands, [&](std::int64_t band) {
    const int y0 = static_cast<int>(band) * kBand;
    const int y1 = std::min(camera.height, y0 + kBand);
    std::vector<std::vector<Entry>> lists(static_cast<std::size_t>(kBand) * camera.width);
    for (std::uint32_t i : band_splats[band]) {
      const ProjectedSplat& p = splats[i];
      const int x0 = std::max(0, static_cast<int>(std::floor(std::max(p.mean2d.x() - p.screen_radius - 1.0, -1.0))));
      const int x1 = std::min(camera.width - 1,
                              static_cast<int>(std::ceil(std::min(p.mean2d.x() + p.screen_radius, 1e9))));
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const Vec2 center(x + 0.5, y + 0.5);
          if (!in_footprint(p, center)) continue;
          const double alpha = eval_fragment_alpha(p, center);
          if (alpha < settings.alpha_cutoff) continue;
          lists[static_cast<std::size_t>(y - y0) * camera.width + x].push_back(
              {p.depth, orders[i], alpha, p.color});
        }
      }
    }
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        auto& list = lists[static_cast<std::size_t>(y - y0) * camera.width + x];
        std::sort(list.begin(), list.end(), [](const Entry& a, const Entry& b) {
          return a.depth < b.depth || (a.depth == b.depth && a.order < b.order);
        });
        double t = 1.0;
        Rgb c = Rgb::Zero();
        for (const Entry& e : list) {
          const double w = t * e.alpha;
          c += w * e.color;
          t *= 1.0 - e.alpha;
          if (t < settings.termination_threshold) break;
        }
        const double w_bg = t * bg.opacity;
        c += w_bg * bg.color;
        image.set(x, y, c);
      }
    }
  });
  return image;
}

std::optional<RayHit> exhaustive_ray_cast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir) {
  const double len = dir.norm();
  if (!(len > 0.0)) return std::nullopt;
  const Vec3 d = dir / len;
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const Face& f = mesh.faces[i];
    auto hit = intersect_triangle(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]],
                                  origin, d, static_cast<int>(i));
    if (hit && (!best || hit_before(*hit, *best))) best = hit;
  }
  return best;
}

SurfacePoint exhaustive_nearest_point(const TriMesh& mesh, const Vec3& p) {
  SurfacePoint best;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const Face& f = mesh.faces[i];
    const SurfacePoint sp = closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                                      mesh.vertices[f[2]], static_cast<int>(i));
    if (best.face < 0 || surface_point_before(sp, best)) best = sp;
  }
  return best;
}

BindingTable exhaustive_bind(const SplatSet& splats, const TriMesh& mesh,
                             std::span<const Camera> cameras, BindMode mode, double k_sigma) {
  return detail::bind_with(
      splats, mesh, cameras, mode, k_sigma,
      [&](const Vec3& o, const Vec3& d) { return exhaustive_ray_cast(mesh, o, d); },
      [&](const Vec3& p) { return exhaustive_nearest_point(mesh, p); });
}

}  // namespace unigs::oracle
