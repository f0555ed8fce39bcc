#include "unigs/splat_projection.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace unigs {

GaussianParams gaussian_at(const SplatSet& splats, std::size_t i) {
  return {splats.positions[i], splats.rotations[i], splats.scales[i], splats.opacities[i]};
}

std::optional<ProjectedSplat> project_splat(const GaussianParams& g, const Camera& camera,
                                            double dilation) {
  const Vec3 pc = camera.to_camera(g.position);
  if (!(pc.z() > camera.near)) return std::nullopt;

  const Mat3 sigma = covariance_from(g.rotation, g.scale);
  const Mat3 sigma_cam = camera.rotation * sigma * camera.rotation.transpose();

  const double inv_z = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << camera.fx * inv_z, 0.0, -camera.fx * pc.x() * inv_z * inv_z,
      0.0, camera.fy * inv_z, -camera.fy * pc.y() * inv_z * inv_z;

  Mat2 cov = jac * sigma_cam * jac.transpose();
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
  cov(0, 0) += dilation;
  cov(1, 1) += dilation;

  const double det = cov.determinant();
  if (!(det > 1e-12)) return std::nullopt;

  ProjectedSplat p;
  p.mean2d = camera.project(pc);
  p.cov2d = cov;
  p.cov2d_inv << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
  p.depth = pc.z();
  p.base_opacity = g.opacity;

  const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  p.screen_radius = 3.0 * std::sqrt(lambda_max);

  const double r = p.screen_radius;
  if (p.mean2d.x() + r < 0.0 || p.mean2d.x() - r > camera.width ||
      p.mean2d.y() + r < 0.0 || p.mean2d.y() - r > camera.height) {
    return std::nullopt;
  }
  return p;
}

double eval_fragment_alpha(const ProjectedSplat& p, const Vec2& pixel) {
  const Vec2 d = pixel - p.mean2d;
  const double power = -0.5 * (p.cov2d_inv(0, 0) * d.x() * d.x() +
                               2.0 * p.cov2d_inv(0, 1) * d.x() * d.y() +
                               p.cov2d_inv(1, 1) * d.y() * d.y());
  return std::min(kMaxFragmentAlpha, p.base_opacity * std::exp(std::min(0.0, power)));
}

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr std::array<double, 5> kC2 = {1.0925484305920792, -1.0925484305920792,
                                       0.31539156525252005, -1.0925484305920792,
                                       0.5462742152960396};
constexpr std::array<double, 7> kC3 = {-0.5900435899266435, 2.890611442640554,
                                       -0.4570457994644658, 0.3731763325901154,
                                       -0.4570457994644658, 1.445305721320277,
                                       -0.5900435899266435};

}  // namespace

void sh_basis(int degree, const Vec3& dir, std::span<double> out) {
  out[0] = kShC0;
  if (degree < 1) return;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (degree < 2) return;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, yz = y * z, xz = x * z;
  out[4] = kC2[0] * xy;
  out[5] = kC2[1] * yz;
  out[6] = kC2[2] * (2.0 * zz - xx - yy);
  out[7] = kC2[3] * xz;
  out[8] = kC2[4] * (xx - yy);
  if (degree < 3) return;
  out[9] = kC3[0] * y * (3.0 * xx - yy);
  out[10] = kC3[1] * xy * z;
  out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  out[14] = kC3[5] * z * (xx - yy);
  out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

Rgb eval_sh_color(std::span<const double> coeffs, int degree, const Vec3& view_dir) {
  const int k = sh_coeff_count(degree);
  std::array<double, 16> basis{};
  sh_basis(degree, view_dir, basis);
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    double v = 0.0;
    for (int i = 0; i < k; ++i) v += basis[i] * coeffs[c * k + i];
    out[c] = std::max(0.0, v + 0.5);
  }
  return out;
}

}  // namespace unigs
