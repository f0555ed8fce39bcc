#pragma once

#include <optional>
#include <span>

#include "unigs/core.hpp"

namespace unigs {

struct GaussianParams {
  Vec3 position;
  Quat rotation;
  Vec3 scale;
  double opacity = 1.0;
};

GaussianParams gaussian_at(const SplatSet& splats, std::size_t i);

// Screen-space footprint of one Gaussian (EWA projection).
struct ProjectedSplat {
  Vec2 mean2d;
  Mat2 cov2d;      // after dilation
  Mat2 cov2d_inv;
  double depth = 0.0;  // view-space z of the mean
  Rgb color = Rgb::Zero();
  double base_opacity = 0.0;
  double screen_radius = 0.0;  // 3 sigma along the major axis, pixels
};

inline constexpr double kMaxFragmentAlpha = 0.99;

// Returns nullopt when the splat is culled: depth <= near, footprint entirely
// outside the viewport, or a degenerate 2D covariance. Color is left zero;
// callers fill it from eval_sh_color.
std::optional<ProjectedSplat> project_splat(const GaussianParams& g, const Camera& camera,
                                            double dilation);

// min(0.99, opacity * exp(-1/2 d^T cov^-1 d)) with d = pixel - mean.
double eval_fragment_alpha(const ProjectedSplat& p, const Vec2& pixel);

// True when `pixel` lies inside the square footprint of half-size
// screen_radius around the mean; pixels outside it are never evaluated.
inline bool in_footprint(const ProjectedSplat& p, const Vec2& pixel) {
  return std::abs(pixel.x() - p.mean2d.x()) <= p.screen_radius &&
         std::abs(pixel.y() - p.mean2d.y()) <= p.screen_radius;
}

// Standard real spherical-harmonic appearance model. `coeffs` holds
// 3 * (degree+1)^2 values laid out [channel][coefficient]; result is
// 0.5 + sum(basis * coeff) per channel, clamped at zero.
Rgb eval_sh_color(std::span<const double> coeffs, int degree, const Vec3& view_dir);

// The (degree+1)^2 basis values in the coefficient order used above.
void sh_basis(int degree, const Vec3& dir, std::span<double> out);

inline constexpr double kShC0 = 0.28209479177387814;

}  // namespace unigs
