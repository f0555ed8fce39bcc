#pragma once

#include <span>
#include <vector>

#include "unigs/binding.hpp"
#include "unigs/core.hpp"
#include "unigs/image.hpp"
#include "unigs/unified_raster.hpp"

// Brute-force references. Slow by design; used by tests and `unigs diff`.
namespace unigs::oracle {

struct OracleImage {
  Image pixels;
  int samples_per_axis = 16;
};

// Each pixel is the mean over samples_per_axis^2 sub-sample points of plain
// ordered alpha blending. Triangle coverage, depth and color, and Gaussian
// alpha are all evaluated at the sub-sample point, so no entity logic is
// involved. Sub-sample (a, b) of pixel (x, y) sits at
// (x + (a + 0.5) / s, y + (b + 0.5) / s).
OracleImage supersample_render(const Scene& scene, const Camera& camera, int samples_per_axis = 16,
                               const RenderSettings& settings = {});

struct EntityBlend {
  Rgb color = Rgb::Zero();      // mean over samples, no background
  std::vector<double> exit_t;   // per-sample transmittance after the entity
};

// Ordered blending of one triangle entity evaluated separately on each of
// the M samples. Throws ContractViolation for Gaussian fragments or
// fragments that cover no sample.
EntityBlend per_sample_entity_blend(std::span<const Fragment> fragments, int samples);

// Mean over the M samples of ordered blending of the whole list, Gaussians
// applying to every sample and triangles only to covered ones, followed by
// the background. No early termination.
BlendResult per_sample_blend(std::span<const Fragment> fragments, int samples,
                             const Background& background);

// Front-to-back blending ignoring coverage masks, no early termination.
BlendResult plain_alpha_blend(std::span<const Fragment> fragments, const Background& background);

// Splat-only renderer written independently of the tiled renderer: scatter
// by row bands, sort by (depth, submission order), blend with the same
// termination rule. Meshes in the scene are ignored.
Image reference_splat_render(const Scene& scene, const Camera& camera,
                             const RenderSettings& settings = {});

// The binding selection rule with every ray tested against every face and
// the fallback found by scanning all faces.
BindingTable exhaustive_bind(const SplatSet& splats, const TriMesh& mesh,
                             std::span<const Camera> cameras, BindMode mode, double k_sigma = 3.0);

std::optional<RayHit> exhaustive_ray_cast(const TriMesh& mesh, const Vec3& origin, const Vec3& dir);
SurfacePoint exhaustive_nearest_point(const TriMesh& mesh, const Vec3& p);

}  // namespace unigs::oracle
