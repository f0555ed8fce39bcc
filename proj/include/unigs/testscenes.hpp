#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unigs/core.hpp"

// Deterministic scene generators for tests, the acceptance suite and
// `unigs render --builtin`.
namespace unigs::testscenes {

// Icosahedron subdivided `subdivisions` times (faces x4 each time),
// projected to a sphere, outward winding.
TriMesh gen_icosphere(int subdivisions, double radius = 1.0);

// major x minor quads, two triangles each.
TriMesh gen_torus(int major_segments, int minor_segments, double major_radius, double minor_radius);

// Uniform in [-extent, extent]^3, log-uniform scales in [min_scale, max_scale],
// uniformly random rotations, SH degree `sh_degree`.
SplatSet gen_random_splats(std::size_t n, std::uint64_t seed, int sh_degree = 1, double extent = 1.0,
                           double min_scale = 0.01, double max_scale = 0.04);

// Flat splats lying on the surface: area-weighted random faces, centers
// within 5e-4 of the face plane, third axis along the face normal.
SplatSet gen_splats_on_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

// `count` cameras (up to 8) on the corners of a cube of half-diagonal
// `distance`, all looking at the origin.
std::vector<Camera> gen_orbit_cameras(int count = 8, double distance = 3.5, int width = 256,
                                      int height = 256);

struct BuiltinScene {
  std::string name;
  Scene scene;
  Camera camera;
  RenderSettings settings;
};

// 64x64. A white opaque triangle covers x < 32.5 px at depth 2, a large
// Gaussian sits at depth 3 and an opaque grey triangle fills the view at
// depth 5, so pixel column 32 sorts as triangle, Gaussian, triangle with
// the near triangle covering half of its samples.
BuiltinScene gen_overflow_scene();

// 64x64. Thin opaque white slivers (about 0.6 px wide) at shallow and
// steep slopes plus one large slanted triangle on black.
BuiltinScene gen_edge_scene();

// 256x256. A cluster of large, smooth Gaussians inside a semi-transparent
// icosphere. `with_splats = false` drops the cluster.
BuiltinScene gen_nested_scene(bool with_splats = true);

// gen_random_splats(n, seed) seen from z = -4 at 512x512.
BuiltinScene gen_random_scene(std::size_t n = 10000, std::uint64_t seed = 7);

// 100K small splats with an optional 10K-triangle semi-transparent torus,
// 800x800.
BuiltinScene gen_bench_scene(bool with_mesh = true, std::size_t splats = 100000);

std::vector<std::string> builtin_names();
// Throws InputError for unknown names.
BuiltinScene builtin(const std::string& name);

}  // namespace unigs::testscenes
