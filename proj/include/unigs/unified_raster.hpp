#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "unigs/core.hpp"
#include "unigs/image.hpp"
#include "unigs/splat_projection.hpp"

namespace unigs {

// Kinds compare triangle-first, which is the tie-break at equal depth.
enum class FragmentKind : std::uint8_t { Triangle = 0, Gaussian = 1 };

// One entry of a pixel's depth-sorted list. Triangle fragments carry an
// M-bit sample coverage mask (bit j = sample j covered).
struct Fragment {
  double depth = 0.0;
  FragmentKind kind = FragmentKind::Gaussian;
  std::uint32_t order = 0;  // submission index within its kind
  double alpha = 0.0;
  Rgb color = Rgb::Zero();
  std::uint64_t coverage = 0;
  bool center_covered = false;

  static Fragment gaussian(double depth, double alpha, const Rgb& color, std::uint32_t order = 0) {
    Fragment f;
    f.depth = depth;
    f.kind = FragmentKind::Gaussian;
    f.order = order;
    f.alpha = alpha;
    f.color = color;
    return f;
  }
  static Fragment triangle(double depth, std::uint64_t coverage, double alpha, const Rgb& color,
                           std::uint32_t order = 0, bool center_covered = true) {
    Fragment f;
    f.depth = depth;
    f.kind = FragmentKind::Triangle;
    f.order = order;
    f.alpha = alpha;
    f.color = color;
    f.coverage = coverage;
    f.center_covered = center_covered;
    return f;
  }
  bool is_triangle() const { return kind == FragmentKind::Triangle; }
};

using FragmentList = std::vector<Fragment>;

// Strict weak order: depth, then kind (triangle first), then submission order.
inline bool fragment_before(const Fragment& a, const Fragment& b) {
  if (a.depth != b.depth) return a.depth < b.depth;
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.order < b.order;
}

inline std::uint64_t full_coverage(int samples) {
  return samples >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << samples) - 1;
}

// Pixel-relative sample offsets. M = 4 is the rotated grid
// (-2,-6), (6,-2), (-6,2), (2,6) in 1/16 pixel; 1, 2, 8 and 16 use the usual
// hardware patterns; other counts fall back to a Hammersley set.
std::vector<Vec2> msaa_sample_offsets(int samples);

struct Background {
  Rgb color = Rgb::Zero();
  double opacity = 1.0;
};

struct BlendResult {
  Rgb color = Rgb::Zero();
  double transmittance = 1.0;  // pixel transmittance before the background
  double weight_sum = 0.0;     // sum of all blending weights, background included
};

// Composites one depth-sorted fragment list front to back according to
// settings.blend_mode. When `trace` is given, every value the pixel
// transmittance takes (starting with 1) is appended to it.
BlendResult blend_pixel(std::span<const Fragment> fragments, const RenderSettings& settings,
                        const Background& background, std::vector<double>* trace = nullptr);

// A mesh face after view transform and near/far clipping.
struct ScreenTriangle {
  std::array<Vec3, 3> cam;  // camera-space vertices
  std::array<Rgb, 3> colors;
  double alpha = 1.0;
  std::uint32_t order = 0;
  Vec3 normal = Vec3::Zero();  // camera-space plane: normal . p = plane_offset
  double plane_offset = 0.0;
  std::array<std::array<Vec2, 3>, 3> pieces{};  // clipped polygon fanned, positive winding
  int piece_count = 0;
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive pixel bounds

  // Top-left fill rule, so faces sharing an edge never both own a sample.
  bool covers(const Vec2& p) const;
  double depth_at(const Vec2& p, const Camera& camera) const;
  // Perspective-correct interpolation of vertex colors.
  Rgb color_at(const Vec2& p, const Camera& camera) const;
};

// A scene flattened into world space, projected for one camera and binned
// into 16x16 tiles. Shared by the renderer and the reference renderers.
struct PreparedView {
  static constexpr int kTileSize = 16;

  Camera camera;
  RenderSettings settings;
  Background background;
  std::vector<Vec2> sample_offsets;

  std::vector<ProjectedSplat> splats;
  std::vector<std::uint32_t> splat_order;
  std::vector<ScreenTriangle> triangles;

  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<std::uint32_t>> tile_splats;
  std::vector<std::vector<std::uint32_t>> tile_triangles;

  int tile_count() const { return tiles_x * tiles_y; }
};

PreparedView prepare_view(const Scene& scene, const Camera& camera, const RenderSettings& settings);

// Fragment lists for the pixels of one tile, row-major within the tile
// (kTileSize^2 entries; entries outside the image stay empty). Lists are
// sorted with fragment_before.
void build_tile_fragments(const PreparedView& view, int tile, std::vector<FragmentList>& lists);

struct FragmentGrid {
  int width = 0;
  int height = 0;
  std::vector<FragmentList> lists;
  const FragmentList& at(int x, int y) const {
    return lists[static_cast<std::size_t>(y) * width + x];
  }
};

FragmentGrid build_fragment_lists(const Scene& scene, const Camera& camera,
                                  const RenderSettings& settings);

struct RenderStats {
  std::uint64_t gaussian_fragments = 0;
  std::uint64_t triangle_fragments = 0;
  int tiles_total = 0;
  int tiles_occupied = 0;
  std::size_t max_list_length = 0;
};

Image render(const Scene& scene, const Camera& camera, const RenderSettings& settings,
             RenderStats* stats = nullptr);
Image render_prepared(const PreparedView& view, RenderStats* stats = nullptr);

}  // namespace unigs
