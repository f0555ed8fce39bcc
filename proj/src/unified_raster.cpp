#include "unigs/unified_raster.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "unigs/error.hpp"
#include "unigs/parallel.hpp"

namespace unigs {

std::vector<Vec2> msaa_sample_offsets(int samples) {
  auto from16 = [](std::initializer_list<std::pair<int, int>> pts) {
    std::vector<Vec2> out;
    for (auto [x, y] : pts) out.emplace_back(x / 16.0, y / 16.0);
    return out;
  };
  switch (samples) {
    case 1: return {Vec2::Zero()};
    case 2: return from16({{4, 4}, {-4, -4}});
    case 4: return from16({{-2, -6}, {6, -2}, {-6, 2}, {2, 6}});
    case 8:
      return from16({{1, -3}, {-1, 3}, {5, 1}, {-3, -5}, {-5, 5}, {-7, -1}, {3, 7}, {7, -7}});
    case 16:
      return from16({{1, 1}, {-1, -3}, {-3, 2}, {4, -1}, {-5, -2}, {2, 5}, {5, 3}, {3, -5},
                     {-2, 6}, {0, -7}, {-4, -6}, {-6, 4}, {-8, 0}, {7, -4}, {6, 7}, {-7, -8}});
    default: break;
  }
  if (samples < 1 || samples > 64) {
    throw InvariantError("msaa sample count must be in [1,64]");
  }
  std::vector<Vec2> out;
  for (int i = 0; i < samples; ++i) {
    unsigned bits = static_cast<unsigned>(i);
    double radical = 0.0, f = 0.5;
    while (bits) {
      radical += f * (bits & 1u);
      bits >>= 1;
      f *= 0.5;
    }
    out.emplace_back((i + 0.5) / samples - 0.5, radical + 0.5 / samples - 0.5);
  }
  return out;
}

BlendResult blend_pixel(std::span<const Fragment> fragments, const RenderSettings& settings,
                        const Background& background, std::vector<double>* trace) {
  const int m = settings.msaa_samples;
  const double inv_m = 1.0 / m;
  const double threshold = settings.termination_threshold;
  const BlendMode mode = settings.blend_mode;

  std::array<double, 64> t{};  // sub-sample transmittance of the open entity
  double big_t = 1.0;
  double t_enter = 1.0;
  bool entity_open = false;
  Rgb color = Rgb::Zero();
  double weights = 0.0;

  auto record = [&] {
    if (trace) trace->push_back(big_t);
  };
  auto close_entity = [&] {
    if (!entity_open) return;
    entity_open = false;
    if (mode == BlendMode::ExactEntity) {
      double mean = 0.0;
      for (int j = 0; j < m; ++j) mean += t[j];
      big_t = t_enter * (mean * inv_m);
      record();
    }
  };
  auto blend_point = [&](const Fragment& f) {
    const double w = big_t * f.alpha;
    color += w * f.color;
    weights += w;
    big_t *= 1.0 - f.alpha;
    record();
  };

  record();
  for (const Fragment& f : fragments) {
    if (!f.is_triangle()) {
      if (entity_open && mode != BlendMode::WholePixelEntity) {
        close_entity();
        if (big_t < threshold) break;
      }
      blend_point(f);
      if (big_t < threshold) break;
      continue;
    }

    if (mode == BlendMode::Naive) {
      if (!f.center_covered) continue;
      blend_point(f);
      if (big_t < threshold) break;
      continue;
    }

    if (!entity_open) {
      entity_open = true;
      t_enter = big_t;
      std::fill(t.begin(), t.begin() + m, 1.0);
    }
    double coverage = 0.0;
    int covered = 0;
    for (int j = 0; j < m; ++j) {
      if (f.coverage >> j & 1u) {
        coverage += t[j];
        ++covered;
      }
    }
    coverage *= inv_m;
    const double w = t_enter * coverage * f.alpha;
    color += w * f.color;
    weights += w;
    for (int j = 0; j < m; ++j) {
      if (f.coverage >> j & 1u) t[j] *= 1.0 - f.alpha;
    }
    if (mode != BlendMode::ExactEntity) {
      big_t *= 1.0 - covered * inv_m * f.alpha;
      record();
      if (big_t < threshold) break;
    }
  }
  close_entity();

  const double w_bg = big_t * background.opacity;
  color += w_bg * background.color;
  weights += w_bg;
  return {color, big_t, weights};
}

namespace {

// Edge function evaluated with endpoints in a canonical order, so the two
// directions of a shared edge produce exactly negated values.
double edge_value(const Vec2& a, const Vec2& b, const Vec2& p) {
  const bool swap = (b.x() < a.x()) || (b.x() == a.x() && b.y() < a.y());
  const Vec2& s = swap ? b : a;
  const Vec2& e = swap ? a : b;
  const double v = (e.x() - s.x()) * (p.y() - s.y()) - (e.y() - s.y()) * (p.x() - s.x());
  return swap ? -v : v;
}

bool owns_edge(const Vec2& a, const Vec2& b) {
  const double dy = b.y() - a.y();
  const double dx = b.x() - a.x();
  return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

bool inside_piece(const std::array<Vec2, 3>& piece, const Vec2& p) {
  for (int e = 0; e < 3; ++e) {
    const Vec2& a = piece[e];
    const Vec2& b = piece[(e + 1) % 3];
    const double v = edge_value(a, b, p);
    if (v < 0.0) return false;
    if (v == 0.0 && !owns_edge(a, b)) return false;
  }
  return true;
}

Vec3 pixel_ray(const Vec2& p, const Camera& c) {
  return {(p.x() - c.cx) / c.fx, (p.y() - c.cy) / c.fy, 1.0};
}

// Clips a convex camera-space polygon against z >= plane (keep_above) or
// z <= plane. Intersections are computed with the edge endpoints in a
// canonical order so neighbouring faces agree bit-for-bit.
int clip_polygon(const std::array<Vec3, 5>& in, int n, double plane, bool keep_above,
                 std::array<Vec3, 5>& out) {
  auto inside = [&](const Vec3& v) { return keep_above ? v.z() >= plane : v.z() <= plane; };
  int count = 0;
  for (int i = 0; i < n; ++i) {
    const Vec3& cur = in[i];
    const Vec3& nxt = in[(i + 1) % n];
    const bool cur_in = inside(cur);
    const bool nxt_in = inside(nxt);
    if (cur_in && count < 5) out[count++] = cur;
    if (cur_in != nxt_in && count < 5) {
      const bool swap = std::lexicographical_compare(nxt.data(), nxt.data() + 3, cur.data(),
                                                     cur.data() + 3);
      const Vec3& a = swap ? nxt : cur;
      const Vec3& b = swap ? cur : nxt;
      const double s = (plane - a.z()) / (b.z() - a.z());
      Vec3 hit = a + s * (b - a);
      hit.z() = plane;
      out[count++] = hit;
    }
  }
  return count;
}

double clamp_coord(double v) { return std::clamp(v, -1e9, 1e9); }

std::optional<ScreenTriangle> setup_triangle(const std::array<Vec3, 3>& world,
                                             const std::array<Rgb, 3>& colors, double alpha,
                                             std::uint32_t order, const Camera& camera) {
  ScreenTriangle tri;
  for (int k = 0; k < 3; ++k) tri.cam[k] = camera.to_camera(world[k]);
  tri.colors = colors;
  tri.alpha = alpha;
  tri.order = order;
  tri.normal = (tri.cam[1] - tri.cam[0]).cross(tri.cam[2] - tri.cam[0]);
  if (!(tri.normal.squaredNorm() > 0.0)) return std::nullopt;
  tri.plane_offset = tri.normal.dot(tri.cam[0]);

  std::array<Vec3, 5> poly{tri.cam[0], tri.cam[1], tri.cam[2]};
  std::array<Vec3, 5> tmp;
  int n = clip_polygon(poly, 3, camera.near, true, tmp);
  n = clip_polygon(tmp, n, camera.far, false, poly);
  if (n < 3) return std::nullopt;

  std::array<Vec2, 5> screen;
  double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
  for (int i = 0; i < n; ++i) {
    screen[i] = camera.project(poly[i]);
    minx = std::min(minx, screen[i].x());
    maxx = std::max(maxx, screen[i].x());
    miny = std::min(miny, screen[i].y());
    maxy = std::max(maxy, screen[i].y());
  }
  for (int i = 1; i + 1 < n; ++i) {
    std::array<Vec2, 3> piece{screen[0], screen[i], screen[i + 1]};
    const double area = (piece[1] - piece[0]).x() * (piece[2] - piece[0]).y() -
                        (piece[1] - piece[0]).y() * (piece[2] - piece[0]).x();
    if (area == 0.0 || !std::isfinite(area)) continue;
    if (area < 0.0) std::swap(piece[1], piece[2]);
    tri.pieces[tri.piece_count++] = piece;
  }
  if (tri.piece_count == 0) return std::nullopt;

  tri.x0 = static_cast<int>(std::max(0.0, std::floor(clamp_coord(minx))));
  tri.y0 = static_cast<int>(std::max(0.0, std::floor(clamp_coord(miny))));
  tri.x1 = static_cast<int>(std::min<double>(camera.width - 1, std::floor(clamp_coord(maxx))));
  tri.y1 = static_cast<int>(std::min<double>(camera.height - 1, std::floor(clamp_coord(maxy))));
  if (tri.x0 > tri.x1 || tri.y0 > tri.y1) return std::nullopt;
  return tri;
}

}  // namespace

bool ScreenTriangle::covers(const Vec2& p) const {
  for (int k = 0; k < piece_count; ++k) {
    if (inside_piece(pieces[k], p)) return true;
  }
  return false;
}

double ScreenTriangle::depth_at(const Vec2& p, const Camera& camera) const {
  const double denom = normal.dot(pixel_ray(p, camera));
  if (std::abs(denom) < 1e-300) {
    return (cam[0].z() + cam[1].z() + cam[2].z()) / 3.0;
  }
  return plane_offset / denom;
}

Rgb ScreenTriangle::color_at(const Vec2& p, const Camera& camera) const {
  if (colors[0] == colors[1] && colors[1] == colors[2]) return colors[0];
  const Vec3 point = pixel_ray(p, camera) * depth_at(p, camera);
  const Vec3 e0 = cam[1] - cam[0];
  const Vec3 e1 = cam[2] - cam[0];
  const Vec3 e2 = point - cam[0];
  const double d00 = e0.dot(e0), d01 = e0.dot(e1), d11 = e1.dot(e1);
  const double d20 = e2.dot(e0), d21 = e2.dot(e1);
  const double denom = d00 * d11 - d01 * d01;
  double v = (d11 * d20 - d01 * d21) / denom;
  double w = (d00 * d21 - d01 * d20) / denom;
  v = std::clamp(v, 0.0, 1.0);
  w = std::clamp(w, 0.0, 1.0);
  if (v + w > 1.0) {
    const double s = v + w;
    v /= s;
    w /= s;
  }
  const double u = 1.0 - v - w;
  return u * colors[0] + v * colors[1] + w * colors[2];
}

PreparedView prepare_view(const Scene& scene, const Camera& camera,
                          const RenderSettings& settings) {
  PreparedView view;
  view.camera = camera;
  view.settings = settings;
  view.background = {scene.background_color, scene.background_opacity};
  view.sample_offsets = msaa_sample_offsets(settings.msaa_samples);
  const Vec3 eye = camera.center();

  std::uint32_t splat_base = 0;
  for (const SplatObject& obj : scene.splat_objects) {
    const SplatSet world = transform_splats(obj.splats, obj.placement);
    std::vector<std::optional<ProjectedSplat>> projected(world.size());
    parallel_for(static_cast<std::int64_t>(world.size()), [&](std::int64_t i) {
      auto p = project_splat(gaussian_at(world, i), camera, settings.gaussian_dilation);
      if (!p) return;
      const Vec3 dir = (world.positions[i] - eye).normalized();
      p->color = eval_sh_color(world.sh(i), world.sh_degree, dir);
      projected[i] = *p;
    });
    for (std::size_t i = 0; i < projected.size(); ++i) {
      if (projected[i]) {
        view.splats.push_back(*projected[i]);
        view.splat_order.push_back(splat_base + static_cast<std::uint32_t>(i));
      }
    }
    splat_base += static_cast<std::uint32_t>(world.size());
  }

  std::uint32_t face_base = 0;
  for (const MeshObject& obj : scene.mesh_objects) {
    const TriMesh world = transform_mesh(obj.mesh, obj.placement);
    std::vector<std::optional<ScreenTriangle>> tris(world.face_count());
    parallel_for(static_cast<std::int64_t>(world.face_count()), [&](std::int64_t i) {
      const Face& f = world.faces[i];
      std::array<Vec3, 3> pos{world.vertices[f[0]], world.vertices[f[1]], world.vertices[f[2]]};
      std::array<Rgb, 3> col;
      for (int k = 0; k < 3; ++k) {
        col[k] = world.has_vertex_colors() ? world.vertex_colors[f[k]] : world.base_color;
      }
      tris[i] = setup_triangle(pos, col, world.opacity, face_base + static_cast<std::uint32_t>(i),
                               camera);
    });
    for (auto& t : tris) {
      if (t) view.triangles.push_back(*t);
    }
    face_base += static_cast<std::uint32_t>(world.face_count());
  }

  constexpr int ts = PreparedView::kTileSize;
  view.tiles_x = (camera.width + ts - 1) / ts;
  view.tiles_y = (camera.height + ts - 1) / ts;
  view.tile_splats.assign(view.tile_count(), {});
  view.tile_triangles.assign(view.tile_count(), {});

  auto bin = [&](int px0, int py0, int px1, int py1, std::uint32_t idx,
                 std::vector<std::vector<std::uint32_t>>& bins) {
    if (px0 > px1 || py0 > py1) return;
    for (int ty = py0 / ts; ty <= py1 / ts; ++ty) {
      for (int tx = px0 / ts; tx <= px1 / ts; ++tx) {
        bins[ty * view.tiles_x + tx].push_back(idx);
      }
    }
  };
  for (std::uint32_t i = 0; i < view.splats.size(); ++i) {
    const ProjectedSplat& s = view.splats[i];
    const double r = s.screen_radius;
    const int px0 = static_cast<int>(std::max(0.0, std::ceil(clamp_coord(s.mean2d.x() - r - 0.5))));
    const int py0 = static_cast<int>(std::max(0.0, std::ceil(clamp_coord(s.mean2d.y() - r - 0.5))));
    const int px1 = static_cast<int>(
        std::min<double>(camera.width - 1, std::floor(clamp_coord(s.mean2d.x() + r - 0.5))));
    const int py1 = static_cast<int>(
        std::min<double>(camera.height - 1, std::floor(clamp_coord(s.mean2d.y() + r - 0.5))));
    bin(px0, py0, px1, py1, i, view.tile_splats);
  }
  for (std::uint32_t i = 0; i < view.triangles.size(); ++i) {
    const ScreenTriangle& t = view.triangles[i];
    bin(t.x0, t.y0, t.x1, t.y1, i, view.tile_triangles);
  }
  return view;
}

void build_tile_fragments(const PreparedView& view, int tile, std::vector<FragmentList>& lists) {
  constexpr int ts = PreparedView::kTileSize;
  lists.resize(ts * ts);
  for (auto& l : lists) l.clear();

  const Camera& cam = view.camera;
  const int tx = tile % view.tiles_x;
  const int ty = tile / view.tiles_x;
  const int px0 = tx * ts, py0 = ty * ts;
  const int px1 = std::min(cam.width, px0 + ts) - 1;
  const int py1 = std::min(cam.height, py0 + ts) - 1;
  const double cutoff = view.settings.alpha_cutoff;
  std::size_t total = 0;

  for (std::uint32_t idx : view.tile_splats[tile]) {
    const ProjectedSplat& s = view.splats[idx];
    const double r = s.screen_radius;
    const int x0 = std::max(px0, static_cast<int>(std::ceil(clamp_coord(s.mean2d.x() - r - 0.5))));
    const int y0 = std::max(py0, static_cast<int>(std::ceil(clamp_coord(s.mean2d.y() - r - 0.5))));
    const int x1 = std::min(px1, static_cast<int>(std::floor(clamp_coord(s.mean2d.x() + r - 0.5))));
    const int y1 = std::min(py1, static_cast<int>(std::floor(clamp_coord(s.mean2d.y() + r - 0.5))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 center(x + 0.5, y + 0.5);
        if (!in_footprint(s, center)) continue;
        const double alpha = eval_fragment_alpha(s, center);
        if (alpha < cutoff) continue;
        lists[(y - py0) * ts + (x - px0)].push_back(
            Fragment::gaussian(s.depth, alpha, s.color, view.splat_order[idx]));
        ++total;
      }
    }
  }

  const auto& offsets = view.sample_offsets;
  const int m = static_cast<int>(offsets.size());
  for (std::uint32_t idx : view.tile_triangles[tile]) {
    const ScreenTriangle& t = view.triangles[idx];
    const int x0 = std::max(px0, t.x0), x1 = std::min(px1, t.x1);
    const int y0 = std::max(py0, t.y0), y1 = std::min(py1, t.y1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 center(x + 0.5, y + 0.5);
        std::uint64_t mask = 0;
        int nearest = -1;
        double nearest_d2 = 1e300;
        for (int j = 0; j < m; ++j) {
          if (t.covers(center + offsets[j])) {
            mask |= std::uint64_t{1} << j;
            const double d2 = offsets[j].squaredNorm();
            if (d2 < nearest_d2) {
              nearest_d2 = d2;
              nearest = j;
            }
          }
        }
        if (!mask) continue;
        const bool center_in = t.covers(center);
        const Vec2 at = center_in ? center : Vec2(center + offsets[nearest]);
        lists[(y - py0) * ts + (x - px0)].push_back(Fragment::triangle(
            t.depth_at(at, cam), mask, t.alpha, t.color_at(at, cam), t.order, center_in));
        ++total;
      }
    }
  }

  if (total > view.settings.max_fragments_per_tile) {
    throw CapacityError(tx, ty, total);
  }
  for (auto& l : lists) std::sort(l.begin(), l.end(), fragment_before);
}

FragmentGrid build_fragment_lists(const Scene& scene, const Camera& camera,
                                  const RenderSettings& settings) {
  const PreparedView view = prepare_view(scene, camera, settings);
  FragmentGrid grid;
  grid.width = camera.width;
  grid.height = camera.height;
  grid.lists.resize(static_cast<std::size_t>(camera.width) * camera.height);
  constexpr int ts = PreparedView::kTileSize;
  parallel_for(view.tile_count(), [&](std::int64_t tile) {
    std::vector<FragmentList> lists;
    build_tile_fragments(view, static_cast<int>(tile), lists);
    const int px0 = static_cast<int>(tile % view.tiles_x) * ts;
    const int py0 = static_cast<int>(tile / view.tiles_x) * ts;
    for (int dy = 0; dy < ts && py0 + dy < camera.height; ++dy) {
      for (int dx = 0; dx < ts && px0 + dx < camera.width; ++dx) {
        grid.lists[static_cast<std::size_t>(py0 + dy) * camera.width + px0 + dx] =
            std::move(lists[dy * ts + dx]);
      }
    }
  });
  return grid;
}

Image render_prepared(const PreparedView& view, RenderStats* stats) {
  const Camera& cam = view.camera;
  Image image(cam.width, cam.height);
  constexpr int ts = PreparedView::kTileSize;
  struct TileStats {
    std::uint64_t gaussians = 0, triangles = 0;
    std::size_t max_list = 0;
  };
  std::vector<TileStats> tile_stats(view.tile_count());
  const Rgb empty_color = blend_pixel({}, view.settings, view.background).color;

  parallel_for(view.tile_count(), [&](std::int64_t tile) {
    const int px0 = static_cast<int>(tile % view.tiles_x) * ts;
    const int py0 = static_cast<int>(tile / view.tiles_x) * ts;
    if (view.tile_splats[tile].empty() && view.tile_triangles[tile].empty()) {
      for (int y = py0; y < std::min(py0 + ts, cam.height); ++y) {
        for (int x = px0; x < std::min(px0 + ts, cam.width); ++x) image.set(x, y, empty_color);
      }
      return;
    }
    std::vector<FragmentList> lists;
    build_tile_fragments(view, static_cast<int>(tile), lists);
    TileStats& st = tile_stats[tile];
    for (int dy = 0; dy < ts && py0 + dy < cam.height; ++dy) {
      for (int dx = 0; dx < ts && px0 + dx < cam.width; ++dx) {
        const FragmentList& list = lists[dy * ts + dx];
        for (const Fragment& f : list) {
          (f.is_triangle() ? st.triangles : st.gaussians) += 1;
        }
        st.max_list = std::max(st.max_list, list.size());
        image.set(px0 + dx, py0 + dy, blend_pixel(list, view.settings, view.background).color);
      }
    }
  });

  if (stats) {
    *stats = RenderStats{};
    stats->tiles_total = view.tile_count();
    for (const TileStats& st : tile_stats) {
      stats->gaussian_fragments += st.gaussians;
      stats->triangle_fragments += st.triangles;
      stats->max_list_length = std::max(stats->max_list_length, st.max_list);
      if (st.gaussians + st.triangles > 0) ++stats->tiles_occupied;
    }
  }
  return image;
}

Image render(const Scene& scene, const Camera& camera, const RenderSettings& settings,
             RenderStats* stats) {
  return render_prepared(prepare_view(scene, camera, settings), stats);
}

}  // namespace unigs
