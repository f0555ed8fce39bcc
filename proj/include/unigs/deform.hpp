#pragma once

#include <cstdint>
#include <vector>

#include "unigs/binding_table.hpp"
#include "unigs/core.hpp"

namespace unigs {

// Per-vertex motion of a proxy mesh: offset, rotation (axis-angle log) and
// symmetric shear from the polar decomposition D = R S of the local
// deformation gradient.
struct VertexTransformField {
  std::vector<Vec3> offset;
  std::vector<Vec3> log_rotation;
  std::vector<Mat3> shear;
  std::vector<Face> faces;  // rest topology, for anchor lookup
  std::uint64_t rest_mesh_hash = 0;
  std::size_t isolated_vertices = 0;  // given R = I, S = I
  std::size_t augmented_vertices = 0; // rank-deficient rings that used the normal term

  std::size_t vertex_count() const { return offset.size(); }
};

// Least-squares fit of D over each vertex's one ring,
//   D = argmin sum |D (p_u - p_v) - (p'_u - p'_v)|^2,
// Tikhonov-regularized towards the identity with weight 1e-8 trace(A) and
// followed by one step of iterative refinement.
// Rings whose edge scatter is nearly rank deficient (flat or collinear) also
// match the scaled area-weighted normal to its deformed counterpart.
VertexTransformField vertex_deformation_gradients(const TriMesh& rest, const TriMesh& deformed);

struct PolarDecomposition {
  Mat3 rotation;  // det +1
  Mat3 shear;     // symmetric
};

// D = U L V^T; R = U V^T with the last singular direction negated when
// needed so that det R = +1; S = V L V^T.
PolarDecomposition polar_decompose(const Mat3& d);

inline constexpr double kMaxLogAngle = 3.14159265358979323846 - 1e-4;

// Axis-angle log with the angle clamped to [0, pi - 1e-4], and its inverse.
Vec3 log_rotation(const Mat3& r);
Mat3 exp_rotation(const Vec3& log_r);
Quat exp_rotation_quat(const Vec3& log_r);

struct PointTransform {
  Vec3 offset = Vec3::Zero();
  Vec3 log_rotation = Vec3::Zero();
  Mat3 shear = Mat3::Identity();
};

// Barycentric blend of the three vertex transforms of `face`; rotations are
// blended in log space.
PointTransform blend_at_point(const VertexTransformField& field, int face, double u, double v,
                              double w);

struct DeformOptions {
  bool drop_sh_rest = false;  // zero SH degrees >= 1 (they are not rotated)
};

struct DeformReport {
  std::size_t rotation_warnings = 0;           // anchors more than pi/2 apart
  std::vector<std::size_t> warned_gaussians;   // first few offenders
  std::size_t fallback_anchors = 0;
};

// Moves every Gaussian by the mean of its anchors' blended transforms:
//   R' = exp(mean log R_i), S' = mean S_i, Sigma' = R'S' Sigma (R'S')^T,
//   mu' = mu + mean Delta_i,
// then re-factors Sigma' into a quaternion and scales. Opacity and SH are
// copied. Throws InputError when the binding was built for another mesh.
SplatSet apply_deformation(const SplatSet& splats, const BindingTable& binding,
                           const VertexTransformField& field, const DeformOptions& options = {},
                           DeformReport* report = nullptr);

// Symmetric 3x3 eigendecomposition by cyclic Jacobi rotations. Eigenvalue i
// stays associated with the i-th starting axis; a nearly diagonal input is
// returned unchanged.
struct SymmetricEigen {
  Vec3 values;
  Mat3 vectors;  // columns, det +1
};
SymmetricEigen jacobi_eigen(const Mat3& a);

}  // namespace unigs
