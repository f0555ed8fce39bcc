#include <gtest/gtest.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <random>

#include "unigs/error.hpp"
#include "unigs/oracle.hpp"
#include "unigs/testscenes.hpp"
#include "unigs/unified_raster.hpp"

using namespace unigs;

namespace {

const Rgb kRed(1, 0, 0), kGreen(0, 1, 0), kWhite(1, 1, 1);

RenderSettings msaa(int m, BlendMode mode = BlendMode::ExactEntity) {
  RenderSettings s;
  s.msaa_samples = m;
  s.blend_mode = mode;
  s.termination_threshold = 1e-12;
  return s;
}

// World space equals camera space: +z forward, +y down. At depth z, screen
// x = 32 + 64 * x / z.
Camera axis_camera(int size = 64) {
  Camera c;
  c.width = c.height = size;
  c.fx = c.fy = size;
  c.cx = c.cy = size / 2.0;
  return c;
}

MeshObject mesh_of(std::vector<Vec3> v, std::vector<Face> f, const Rgb& color, double opacity = 1.0) {
  MeshObject m;
  m.mesh.vertices = std::move(v);
  m.mesh.faces = std::move(f);
  m.mesh.base_color = color;
  m.mesh.opacity = opacity;
  return m;
}

std::vector<Fragment> random_list(std::mt19937_64& rng, int m, bool full_cover) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Fragment> list;
  const int n = 1 + static_cast<int>(u(rng) * 8);
  for (int i = 0; i < n; ++i) {
    const Rgb c(u(rng), u(rng), u(rng));
    if (u(rng) < 0.5) {
      list.push_back(Fragment::gaussian(i, 0.99 * u(rng), c));
    } else {
      std::uint64_t mask = full_cover ? full_coverage(m) : (rng() & full_coverage(m));
      if (mask == 0) mask = 1;
      list.push_back(Fragment::triangle(i, mask, 0.05 + 0.95 * u(rng), c));
    }
  }
  return list;
}

}  // namespace

TEST(BlendPixel, HalfCoveredOpaqueWhiteIsHalfGrey) {
  const Fragment tri = Fragment::triangle(1.0, 0b0011, 1.0, kWhite);
  const BlendResult r = blend_pixel({&tri, 1}, msaa(4), Background{});
  EXPECT_NEAR(r.color.x(), 0.5, 1e-15);
  EXPECT_NEAR(r.color.z(), 0.5, 1e-15);
  EXPECT_NEAR(r.transmittance, 0.5, 1e-15);
}

TEST(BlendPixel, TwoFullCoverageHalfAlphaTriangles) {
  const std::vector<Fragment> l = {Fragment::triangle(1, 0xF, 0.5, kRed), Fragment::triangle(2, 0xF, 0.5, kGreen)};
  for (BlendMode mode : {BlendMode::ExactEntity, BlendMode::PaperLiteral, BlendMode::WholePixelEntity}) {
    const BlendResult r = blend_pixel(l, msaa(4, mode), Background{});
    EXPECT_NEAR(r.color.x(), 0.5, 1e-15);
    EXPECT_NEAR(r.color.y(), 0.25, 1e-15);
    EXPECT_NEAR(r.color.z(), 0.0, 1e-15);
    EXPECT_NEAR(r.transmittance, 0.25, 1e-15);
  }
}

TEST(BlendPixel, TriangleGaussianTriangleMatchesPerSampleBlend) {
  const Rgb gauss_color(0.2, 0.4, 0.9);
  const std::vector<Fragment> l = {Fragment::triangle(1, 0b0101, 1.0, kRed),
                                   Fragment::gaussian(2, 0.5, gauss_color),
                                   Fragment::triangle(3, 0xF, 1.0, kWhite)};
  const BlendResult exact = blend_pixel(l, msaa(4), Background{});
  const BlendResult ref = oracle::per_sample_blend(l, 4, Background{});
  EXPECT_TRUE(exact.color.isApprox(ref.color, 1e-12)) << exact.color.transpose();
  // 0.5 red + 0.5 * (0.5 gauss + 0.5 white), by hand.
  EXPECT_TRUE(exact.color.isApprox(0.5 * kRed + 0.25 * gauss_color + 0.25 * kWhite, 1e-12));

  // Treating the whole list as one entity lets the far triangle ignore the
  // Gaussian's absorption: total weight exceeds one.
  const BlendResult whole = blend_pixel(l, msaa(4, BlendMode::WholePixelEntity), Background{});
  EXPECT_GT(whole.weight_sum, 1.0 + 1e-3);
  EXPECT_GT(whole.color.z(), ref.color.z() + 1e-3);
}

TEST(BlendPixel, EntityExactnessAgainstPerSampleEntityBlend) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int m : {1, 2, 4, 8, 16}) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Fragment> l;
      const int n = 1 + trial % 6;
      for (int i = 0; i < n; ++i) {
        std::uint64_t mask = rng() & full_coverage(m);
        if (mask == 0) mask = 1;
        l.push_back(Fragment::triangle(i, mask, 0.05 + 0.95 * u(rng), Rgb(u(rng), u(rng), u(rng))));
      }
      const BlendResult r = blend_pixel(l, msaa(m), Background{Rgb::Zero(), 0.0});
      const oracle::EntityBlend ref = oracle::per_sample_entity_blend(l, m);
      for (int c = 0; c < 3; ++c) ASSERT_NEAR(r.color[c], ref.color[c], 1e-12);
      double mean_t = 0.0;
      for (double t : ref.exit_t) mean_t += t;
      ASSERT_NEAR(r.transmittance, mean_t / m, 1e-12);
    }
  }
}

TEST(BlendPixel, FullCoverageReducesToPlainBlending) {
  std::mt19937_64 rng(12);
  const Background bg{Rgb(0.3, 0.6, 0.1), 1.0};
  for (int trial = 0; trial < 500; ++trial) {
    const auto l = random_list(rng, 4, true);
    const BlendResult r = blend_pixel(l, msaa(4), bg);
    const BlendResult ref = oracle::plain_alpha_blend(l, bg);
    for (int c = 0; c < 3; ++c) ASSERT_NEAR(r.color[c], ref.color[c], 1e-12);
  }
}

TEST(BlendPixel, PartitionOfUnityAndMonotoneTransmittance) {
  std::mt19937_64 rng(13);
  for (BlendMode mode : {BlendMode::ExactEntity, BlendMode::PaperLiteral, BlendMode::Naive}) {
    for (int trial = 0; trial < 500; ++trial) {
      const auto l = random_list(rng, 4, false);
      std::vector<double> trace;
      const BlendResult r = blend_pixel(l, msaa(4, mode), Background{}, &trace);
      if (mode == BlendMode::ExactEntity) {
        ASSERT_NEAR(r.weight_sum, 1.0, 1e-12);
      }
      ASSERT_FALSE(trace.empty());
      ASSERT_EQ(trace.front(), 1.0);
      for (std::size_t i = 1; i < trace.size(); ++i) {
        ASSERT_LE(trace[i], trace[i - 1]);
        ASSERT_GE(trace[i], 0.0);
      }
      // With bounded inputs the exact mode never overshoots.
      if (mode == BlendMode::ExactEntity) {
        ASSERT_LE(r.color.maxCoeff(), 1.0 + 1e-12);
      }
    }
  }
}

TEST(BlendPixel, TerminationStopsAtThreshold) {
  RenderSettings s = msaa(4);
  s.termination_threshold = 0.2;
  const std::vector<Fragment> l = {Fragment::gaussian(1, 0.9, kRed), Fragment::gaussian(2, 0.9, kGreen)};
  const BlendResult r = blend_pixel(l, s, Background{kWhite, 1.0});
  // The second Gaussian is skipped; the background still gets the final T.
  EXPECT_NEAR(r.color.x(), 1.0, 1e-15);
  EXPECT_NEAR(r.color.y(), 0.1, 1e-15);
  EXPECT_NEAR(r.transmittance, 0.1, 1e-15);
}

TEST(BlendPixel, NaiveUsesCenterCoverageOnly) {
  std::vector<Fragment> l = {Fragment::triangle(1, 0b0001, 1.0, kWhite, 0, false)};
  EXPECT_EQ(blend_pixel(l, msaa(4, BlendMode::Naive), Background{}).color, Rgb::Zero());
  l[0].center_covered = true;
  EXPECT_EQ(blend_pixel(l, msaa(4, BlendMode::Naive), Background{}).color, kWhite);
}

TEST(Msaa, FourSamplePatternIsTheRotatedGrid) {
  const auto o = msaa_sample_offsets(4);
  ASSERT_EQ(o.size(), 4u);
  const double px[4][2] = {{-2, -6}, {6, -2}, {-6, 2}, {2, 6}};
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(o[j].x(), px[j][0] / 16.0);
    EXPECT_EQ(o[j].y(), px[j][1] / 16.0);
  }
  for (int m : {1, 2, 3, 8, 16, 64}) {
    const auto s = msaa_sample_offsets(m);
    ASSERT_EQ(static_cast<int>(s.size()), m);
    for (const Vec2& v : s) {
      EXPECT_GE(v.x(), -0.5);
      EXPECT_LT(v.x(), 0.5);
      EXPECT_GE(v.y(), -0.5);
      EXPECT_LT(v.y(), 0.5);
    }
  }
}

TEST(FragmentLists, EmptySceneHasEmptyLists) {
  const FragmentGrid g = build_fragment_lists(Scene{}, axis_camera(), RenderSettings{});
  for (const auto& l : g.lists) EXPECT_TRUE(l.empty());
  const Image img = render(Scene{}, axis_camera(), RenderSettings{});
  for (double v : img.data) EXPECT_EQ(v, 0.0);
}

TEST(FragmentLists, SplatInFrontOfFullScreenTriangle) {
  Scene scene;
  scene.mesh_objects.push_back(mesh_of({{-50, -50, 5}, {50, -50, 5}, {0, 80, 5}}, {{0, 1, 2}}, kWhite));
  SplatObject so;
  so.splats.resize(1);
  so.splats.positions[0] = Vec3(0, 0, 3);
  so.splats.scales[0] = Vec3::Constant(0.5);
  so.splats.opacities[0] = 0.9;
  scene.splat_objects.push_back(so);
  const FragmentGrid g = build_fragment_lists(scene, axis_camera(), RenderSettings{});
  int both = 0;
  for (const auto& l : g.lists) {
    ASSERT_GE(l.size(), 1u);
    ASSERT_TRUE(l.back().is_triangle());
    if (l.size() == 2) {
      ++both;
      EXPECT_FALSE(l[0].is_triangle());
      EXPECT_EQ(l[0].depth, 3.0);
      EXPECT_NEAR(l[1].depth, 5.0, 1e-12);
    }
  }
  EXPECT_GT(both, 100);
}

TEST(FragmentLists, InterpenetratingTrianglesFollowPlaneDepth) {
  // Planes z = 3 + 0.5 x and z = 3 - 0.5 x cross along x = 0.
  Scene scene;
  scene.mesh_objects.push_back(
      mesh_of({{-2, -3, 2}, {2, -3, 4}, {0, 3, 3}}, {{0, 1, 2}}, kRed));
  scene.mesh_objects.push_back(
      mesh_of({{-2, -3, 4}, {2, -3, 2}, {0, 3, 3}}, {{0, 1, 2}}, kGreen));
  const Camera cam = axis_camera();
  const FragmentGrid g = build_fragment_lists(scene, cam, msaa(4));
  int left = 0, right = 0;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const auto& l = g.at(x, y);
      if (l.size() != 2 || !l[0].center_covered || !l[1].center_covered) continue;
      // Ray through the pixel center: (sx, sy, 1) * z.
      const double sx = (x + 0.5 - cam.cx) / cam.fx;
      const double z_red = 3.0 / (1.0 - 0.5 * sx);
      const double z_green = 3.0 / (1.0 + 0.5 * sx);
      const Rgb nearer = z_red < z_green ? kRed : kGreen;
      if (z_red == z_green) continue;
      EXPECT_EQ(l[0].color, nearer) << x << "," << y;
      EXPECT_NEAR(l[0].depth, std::min(z_red, z_green), 1e-9);
      EXPECT_NEAR(l[1].depth, std::max(z_red, z_green), 1e-9);
      (z_red < z_green ? left : right)++;
    }
  }
  EXPECT_GT(left, 50);
  EXPECT_GT(right, 50);
}

TEST(FragmentLists, SharedEdgesAreWatertight) {
  // A quad at z = 2 split along a vertical edge that runs exactly through
  // sample positions (screen x = 32.625), plus a second quad split along a
  // slanted diagonal.
  const double xe = 0.625 / 32.0;
  Scene scene;
  scene.mesh_objects.push_back(mesh_of({{-0.5, -0.8, 2}, {xe, -0.8, 2}, {xe, 0.8, 2}, {-0.5, 0.8, 2}},
                                       {{0, 1, 2}, {0, 2, 3}}, kWhite));
  scene.mesh_objects.push_back(mesh_of({{xe, -0.8, 2}, {0.6, -0.8, 2}, {0.6, 0.8, 2}, {xe, 0.8, 2}},
                                       {{0, 1, 2}, {0, 2, 3}}, kWhite));
  const Camera cam = axis_camera();
  for (int m : {1, 4, 16}) {
    const FragmentGrid g = build_fragment_lists(scene, cam, msaa(m));
    const auto offsets = msaa_sample_offsets(m);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        std::uint64_t seen = 0;
        for (const Fragment& f : g.at(x, y)) {
          ASSERT_EQ(seen & f.coverage, 0u) << "double coverage at " << x << "," << y;
          seen |= f.coverage;
        }
        for (int j = 0; j < m; ++j) {
          const Vec2 p(x + 0.5 + offsets[j].x(), y + 0.5 + offsets[j].y());
          // Inside the union of both quads in screen space, strictly.
          const bool inside = p.x() > 32 - 16 + 1e-9 && p.x() < 32 + 19.2 - 1e-9 && p.y() > 32 - 25.6 + 1e-9 &&
                              p.y() < 32 + 25.6 - 1e-9;
          if (inside) {
            ASSERT_TRUE(seen >> j & 1u) << "hole at " << x << "," << y << " sample " << j;
          }
        }
      }
    }
  }
}

TEST(Render, OpaqueFullScreenTriangleHidesEverything) {
  testscenes::BuiltinScene nested = testscenes::gen_nested_scene();
  Scene scene = nested.scene;
  const Camera& cam = nested.camera;
  // A huge triangle 0.5 units in front of the camera.
  const Vec3 c = cam.center();
  const Mat3 r = cam.rotation.transpose();
  auto at = [&](double x, double y) -> Vec3 { return c + r * Vec3(x, y, 0.5); };
  scene.mesh_objects.push_back(mesh_of({at(-10, -10), at(10, -10), at(0, 20)}, {{0, 1, 2}}, Rgb(0.2, 0.7, 0.4)));
  const Image img = render(scene, cam, nested.settings);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) ASSERT_TRUE(img.at(x, y).isApprox(Rgb(0.2, 0.7, 0.4), 1e-12)) << x << "," << y << " " << img.at(x, y).transpose();
  }
}

TEST(Render, GaussiansOnlyMatchesReferenceSplatRenderer) {
  const testscenes::BuiltinScene s = testscenes::gen_random_scene(2000, 3);
  Camera cam = s.camera;
  cam.width = cam.height = 128;
  cam.fx = cam.fy = cam.fx / 4;
  cam.cx = cam.cy = 64;
  const Image a = render(s.scene, cam, s.settings);
  const Image b = oracle::reference_splat_render(s.scene, cam, s.settings);
  const ImageDiff d = diff_images(a, b);
  EXPECT_LE(d.max_abs_error, 1e-6);
}

TEST(Render, DeterministicAndPixelListConsistent) {
  const testscenes::BuiltinScene s = testscenes::gen_nested_scene();
  const Image a = render(s.scene, s.camera, s.settings);
  const Image b = render(s.scene, s.camera, s.settings);
  EXPECT_EQ(a.data, b.data);

  // render == blend_pixel over build_fragment_lists, pixel by pixel.
  const FragmentGrid g = build_fragment_lists(s.scene, s.camera, s.settings);
  const Background bg{s.scene.background_color, s.scene.background_opacity};
  for (int y = 0; y < a.height; y += 7) {
    for (int x = 0; x < a.width; x += 5) {
      const Rgb c = blend_pixel(g.at(x, y), s.settings, bg).color;
      ASSERT_EQ(c, a.at(x, y));
    }
  }
}

TEST(Render, TileCapacityErrorNamesTheTile) {
  const testscenes::BuiltinScene s = testscenes::gen_nested_scene();
  RenderSettings settings = s.settings;
  settings.max_fragments_per_tile = 8;
  try {
    render(s.scene, s.camera, settings);
    FAIL();
  } catch (const CapacityError& e) {
    EXPECT_GE(e.tile_x(), 0);
    EXPECT_GE(e.tile_y(), 0);
  }
}

TEST(Render, ListsAreSortedWithTriangleFirstTies) {
  const testscenes::BuiltinScene s = testscenes::gen_nested_scene();
  const FragmentGrid g = build_fragment_lists(s.scene, s.camera, s.settings);
  for (const auto& l : g.lists) {
    for (std::size_t i = 1; i < l.size(); ++i) ASSERT_FALSE(fragment_before(l[i], l[i - 1]));
    for (const Fragment& f : l) {
      if (f.is_triangle()) {
        ASSERT_NE(f.coverage, 0u);
      } else {
        ASSERT_GE(f.alpha, s.settings.alpha_cutoff);
      }
    }
  }
  const Fragment t = Fragment::triangle(1.0, 1, 1.0, kWhite, 5);
  const Fragment gs = Fragment::gaussian(1.0, 0.5, kWhite, 0);
  EXPECT_TRUE(fragment_before(t, gs));
  EXPECT_FALSE(fragment_before(gs, t));
}

TEST(Render, EmptySceneIsBackgroundAndSubMillisecond) {
  const testscenes::BuiltinScene s = testscenes::builtin("empty");
  Scene scene = s.scene;
  scene.background_color = Rgb(0.2, 0.4, 0.8);
  scene.background_opacity = 0.5;
  std::vector<double> ms;
  Image img;
  for (int i = 0; i < 11; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    img = render(scene, s.camera, s.settings);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) ASSERT_TRUE(img.at(x, y).isApprox(Rgb(0.1, 0.2, 0.4), 1e-15));
  }
  std::nth_element(ms.begin(), ms.begin() + 5, ms.end());
  EXPECT_LT(ms[5], 1.0) << "median frame time at " << img.width << "x" << img.height;
}
