#include "unigs/deform.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <set>

#include "unigs/error.hpp"
#include "unigs/parallel.hpp"

namespace unigs {

namespace {

Vec3 area_normal(const TriMesh& mesh, const std::vector<int>& incident) {
  Vec3 n = Vec3::Zero();
  for (int f : incident) {
    const Face& face = mesh.faces[f];
    n += (mesh.vertices[face[1]] - mesh.vertices[face[0]])
             .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
  }
  return n;
}

}  // namespace

PolarDecomposition polar_decompose(const Mat3& d) {
  Eigen::JacobiSVD<Mat3> svd(d, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Vec3 sigma = svd.singularValues();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) = -u.col(2);
    sigma(2) = -sigma(2);
  }
  PolarDecomposition out;
  out.rotation = u * v.transpose();
  out.shear = v * sigma.asDiagonal() * v.transpose();
  out.shear = 0.5 * (out.shear + out.shear.transpose()).eval();
  return out;
}

Vec3 log_rotation(const Mat3& r) {
  Quat q(r);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double s = q.vec().norm();
  if (s == 0.0) return Vec3::Zero();
  const double angle = std::min(2.0 * std::atan2(s, q.w()), kMaxLogAngle);
  return q.vec() / s * angle;
}

Quat exp_rotation_quat(const Vec3& log_r) {
  const double angle = log_r.norm();
  if (angle == 0.0) return Quat::Identity();
  const double half = 0.5 * angle;
  const Vec3 axis = log_r / angle;
  return Quat(std::cos(half), axis.x() * std::sin(half), axis.y() * std::sin(half),
              axis.z() * std::sin(half));
}

Mat3 exp_rotation(const Vec3& log_r) { return exp_rotation_quat(log_r).toRotationMatrix(); }

SymmetricEigen jacobi_eigen(const Mat3& input) {
  Mat3 a = 0.5 * (input + input.transpose());
  Mat3 v = Mat3::Identity();
  const double scale = a.norm();
  const double tol = 1e-14 * scale;
  for (int sweep = 0; sweep < 64; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol) continue;
        rotated = true;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Mat3 j = Mat3::Identity();
        j(p, p) = c;
        j(q, q) = c;
        j(p, q) = s;
        j(q, p) = -s;
        a = (j.transpose() * a * j).eval();
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        v = (v * j).eval();
      }
    }
    if (!rotated) break;
  }
  return {a.diagonal(), v};
}

VertexTransformField vertex_deformation_gradients(const TriMesh& rest, const TriMesh& deformed) {
  if (rest.vertex_count() != deformed.vertex_count() || rest.faces != deformed.faces) {
    throw InputError("rest and deformed meshes differ in vertex count or face topology");
  }
  const std::size_t n = rest.vertex_count();
  std::vector<std::set<int>> ring(n);
  std::vector<std::vector<int>> incident(n);
  for (std::size_t f = 0; f < rest.faces.size(); ++f) {
    const Face& face = rest.faces[f];
    for (int k = 0; k < 3; ++k) {
      ring[face[k]].insert(face[(k + 1) % 3]);
      ring[face[k]].insert(face[(k + 2) % 3]);
      incident[face[k]].push_back(static_cast<int>(f));
    }
  }

  VertexTransformField field;
  field.offset.resize(n);
  field.log_rotation.assign(n, Vec3::Zero());
  field.shear.assign(n, Mat3::Identity());
  field.faces = rest.faces;
  field.rest_mesh_hash = rest.content_hash();
  std::vector<char> isolated(n, 0), augmented(n, 0);

  parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t vi) {
    const Vec3& p = rest.vertices[vi];
    const Vec3& q = deformed.vertices[vi];
    field.offset[vi] = q - p;
    if (ring[vi].empty()) {
      isolated[vi] = 1;
      return;
    }
    Mat3 a = Mat3::Zero();
    Mat3 b = Mat3::Zero();
    double len2 = 0.0, len2_def = 0.0;
    for (int u : ring[vi]) {
      const Vec3 e = rest.vertices[u] - p;
      const Vec3 e_def = deformed.vertices[u] - q;
      a += e * e.transpose();
      b += e_def * e.transpose();
      len2 += e.squaredNorm();
      len2_def += e_def.squaredNorm();
    }
    const double trace = a.trace();
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(a, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()(0) < 1e-4 * trace) {
      const Vec3 n_rest = area_normal(rest, incident[vi]);
      const Vec3 n_def = area_normal(deformed, incident[vi]);
      if (n_rest.norm() > 0.0 && n_def.norm() > 0.0) {
        const double k = static_cast<double>(ring[vi].size());
        const Vec3 e = n_rest.normalized() * std::sqrt(len2 / k);
        const Vec3 e_def = n_def.normalized() * std::sqrt(len2_def / k);
        a += e * e.transpose();
        b += e_def * e.transpose();
        augmented[vi] = 1;
      }
    }
    const double lambda = 1e-8 * a.trace();
    const Mat3 reg = lambda * Mat3::Identity();
    // D (A + lambda I) = B + lambda I; A is symmetric, so solve the transpose.
    const Eigen::LDLT<Mat3> solver(a + reg);
    Mat3 d = solver.solve((b + reg).transpose()).transpose();
    // One refinement step against the unregularized residual B - D A. The
    // regularization bias drops from lambda/lambda_min to its square, so
    // globally affine maps come back to rounding precision.
    d += solver.solve((b - d * a).transpose()).transpose();
    const PolarDecomposition pd = polar_decompose(d);
    field.log_rotation[vi] = log_rotation(pd.rotation);
    field.shear[vi] = pd.shear;
  });
  for (std::size_t i = 0; i < n; ++i) {
    field.isolated_vertices += isolated[i];
    field.augmented_vertices += augmented[i];
  }
  return field;
}

PointTransform blend_at_point(const VertexTransformField& field, int face, double u, double v,
                              double w) {
  const Face& f = field.faces.at(static_cast<std::size_t>(face));
  PointTransform out;
  out.offset = u * field.offset[f[0]] + v * field.offset[f[1]] + w * field.offset[f[2]];
  out.log_rotation =
      u * field.log_rotation[f[0]] + v * field.log_rotation[f[1]] + w * field.log_rotation[f[2]];
  out.shear = u * field.shear[f[0]] + v * field.shear[f[1]] + w * field.shear[f[2]];
  return out;
}

SplatSet apply_deformation(const SplatSet& splats, const BindingTable& binding,
                           const VertexTransformField& field, const DeformOptions& options,
                           DeformReport* report) {
  if (binding.mesh_hash != field.rest_mesh_hash ||
      binding.mesh_face_count != field.faces.size()) {
    throw InputError("binding table was built against a different proxy mesh");
  }
  if (binding.gaussian_count != splats.size()) {
    throw InputError("binding table covers " + std::to_string(binding.gaussian_count) +
                     " gaussians but the splat set has " + std::to_string(splats.size()));
  }
  const auto problems = validate_binding(binding);
  if (!problems.empty()) throw InvariantError("invalid binding table: " + problems[0]);

  SplatSet out = splats;
  const int per = binding.anchors_per_gaussian();
  std::vector<char> warned(splats.size(), 0);

  parallel_for(static_cast<std::int64_t>(splats.size()), [&](std::int64_t g) {
    const auto anchors = binding.anchors_of(g);
    Vec3 offset = Vec3::Zero();
    Vec3 log_r = Vec3::Zero();
    Mat3 shear = Mat3::Zero();
    std::array<Quat, 8> rotations;
    for (int k = 0; k < per; ++k) {
      const Anchor& a = anchors[k];
      const PointTransform t = blend_at_point(field, a.face, a.u, a.v, a.w);
      offset += t.offset;
      log_r += t.log_rotation;
      shear += t.shear;
      rotations[k] = exp_rotation_quat(t.log_rotation);
    }
    offset /= per;
    log_r /= per;
    shear /= per;

    for (int i = 0; i < per && !warned[g]; ++i) {
      for (int k = i + 1; k < per; ++k) {
        const double dot = std::min(1.0, std::abs(rotations[i].dot(rotations[k])));
        if (2.0 * std::acos(dot) > 0.5 * M_PI) {
          warned[g] = 1;
          break;
        }
      }
    }

    const Quat r_prime = exp_rotation_quat(log_r);
    const Mat3 m = r_prime.toRotationMatrix() * shear;
    const Quat q_old = splats.rotations[g].normalized();
    const Vec3 s = splats.scales[g];
    const Mat3 sigma = covariance_from(q_old, s);
    Mat3 sigma_new = m * sigma * m.transpose();
    sigma_new = 0.5 * (sigma_new + sigma_new.transpose()).eval();

    // Diagonalize in the frame the old axes are carried to, so each new
    // scale stays attached to its old axis and an unchanged covariance
    // reproduces the input exactly.
    const Quat frame = (r_prime * q_old).normalized();
    const Mat3 qm = frame.toRotationMatrix();
    const SymmetricEigen eig = jacobi_eigen(qm.transpose() * sigma_new * qm);
    Quat q_new = (frame * Quat(eig.vectors)).normalized();
    if (q_new.dot(q_old) < 0.0) q_new.coeffs() = -q_new.coeffs();
    out.positions[g] = splats.positions[g] + offset;
    out.rotations[g] = q_new;
    for (int axis = 0; axis < 3; ++axis) {
      out.scales[g][axis] = std::sqrt(std::max(eig.values[axis], 1e-12));
    }
  });

  if (options.drop_sh_rest && out.sh_degree > 0) {
    const int k = out.coeffs_per_channel();
    for (std::size_t g = 0; g < out.size(); ++g) {
      auto sh = out.sh(g);
      for (int c = 0; c < 3; ++c) {
        std::fill(sh.begin() + c * k + 1, sh.begin() + (c + 1) * k, 0.0);
      }
    }
  }

  if (report) {
    *report = DeformReport{};
    report->fallback_anchors = binding.fallback_count();
    for (std::size_t g = 0; g < warned.size(); ++g) {
      if (!warned[g]) continue;
      ++report->rotation_warnings;
      if (report->warned_gaussians.size() < 16) report->warned_gaussians.push_back(g);
    }
  }
  return out;
}

}  // namespace unigs
