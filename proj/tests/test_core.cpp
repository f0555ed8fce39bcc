#include <gtest/gtest.h>

#include <cmath>

#include "unigs/core.hpp"
#include "unigs/error.hpp"
#include "unigs/testscenes.hpp"
#include "unigs/unified_raster.hpp"

using namespace unigs;

namespace {

bool has_message(const std::vector<Diagnostic>& d, const std::string& msg) {
  for (const auto& x : d) {
    if (x.message == msg) return true;
  }
  return false;
}

Scene one_splat_scene() {
  Scene scene;
  SplatObject obj;
  obj.splats.resize(1);
  obj.splats.positions[0] = Vec3(0.1, -0.2, 0.3);
  obj.splats.scales[0] = Vec3(0.1, 0.2, 0.3);
  scene.splat_objects.push_back(obj);
  return scene;
}

}  // namespace

TEST(Validate, CleanSceneHasNoDiagnostics) {
  EXPECT_TRUE(validate_scene(one_splat_scene()).empty());
}

TEST(Validate, ZeroScaleIsReported) {
  Scene scene = one_splat_scene();
  scene.splat_objects[0].splats.scales[0] = Vec3(0, 1, 1);
  const auto d = validate_scene(scene);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].message, "scale non-positive");
  EXPECT_EQ(d[0].field, "scale");
  EXPECT_NE(d[0].object.find("splat_objects[0]"), std::string::npos);
}

TEST(Validate, DegenerateFaceIsReported) {
  Scene scene;
  MeshObject m;
  m.mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.mesh.faces = {{0, 0, 1}};
  scene.mesh_objects.push_back(m);
  EXPECT_TRUE(has_message(validate_scene(scene), "degenerate face"));
}

TEST(Validate, OtherInvariants) {
  Scene scene = one_splat_scene();
  scene.splat_objects[0].splats.rotations[0] = Quat(2, 0, 0, 0);
  scene.splat_objects[0].splats.opacities[0] = 1.5;
  MeshObject m;
  m.mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.mesh.faces = {{0, 1, 3}};
  m.mesh.opacity = 0.0;
  scene.mesh_objects.push_back(m);
  scene.background_opacity = 2.0;
  const auto d = validate_scene(scene);
  EXPECT_TRUE(has_message(d, "quaternion not unit norm"));
  EXPECT_TRUE(has_message(d, "opacity outside [0,1]"));
  EXPECT_TRUE(has_message(d, "face index out of range"));
  EXPECT_TRUE(has_message(d, "mesh opacity outside (0,1]"));
  EXPECT_TRUE(has_message(d, "background opacity outside [0,1]"));
}

TEST(Validate, CameraAndSettings) {
  Camera cam = Camera::look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), 1.0, 32, 32);
  EXPECT_TRUE(validate_camera(cam).empty());
  cam.rotation(0, 0) *= 1.01;
  EXPECT_FALSE(validate_camera(cam).empty());
  cam = Camera::look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), 1.0, 32, 32);
  cam.near = 5;
  cam.far = 1;
  EXPECT_FALSE(validate_camera(cam).empty());

  RenderSettings s;
  EXPECT_TRUE(validate_settings(s).empty());
  s.msaa_samples = 0;
  s.alpha_cutoff = 1.0;
  s.termination_threshold = 0.0;
  EXPECT_EQ(validate_settings(s).size(), 3u);
}

TEST(Camera, LookAtKeepsUpUpAndRightRight) {
  const Camera cam = Camera::look_at(Vec3(0, 0, -5), Vec3::Zero(), Vec3::UnitY(), M_PI / 3, 100, 80);
  EXPECT_NEAR(cam.rotation.determinant(), 1.0, 1e-12);
  EXPECT_TRUE(cam.center().isApprox(Vec3(0, 0, -5)));
  const Vec2 c = cam.project(cam.to_camera(Vec3::Zero()));
  EXPECT_NEAR(c.x(), 50.0, 1e-9);
  EXPECT_NEAR(c.y(), 40.0, 1e-9);
  // World +y appears above the principal point.
  EXPECT_LT(cam.project(cam.to_camera(Vec3(0, 0.5, 0))).y(), 40.0);
  // Looking down +z with +y up, world -x is on the right of the image.
  EXPECT_GT(cam.project(cam.to_camera(Vec3(-0.5, 0, 0))).x(), 50.0);
  EXPECT_NEAR(cam.fy, 0.5 * 80 / std::tan(M_PI / 6), 1e-9);
}

TEST(Mesh, ContentHashTracksGeometryOnly) {
  TriMesh a = testscenes::gen_icosphere(1);
  TriMesh b = a;
  b.base_color = Rgb(0.1, 0.2, 0.3);
  b.opacity = 0.5;
  EXPECT_EQ(a.content_hash(), b.content_hash());
  b.vertices[3].x() += 1e-12;
  EXPECT_NE(a.content_hash(), b.content_hash());
  TriMesh c = a;
  std::swap(c.faces[0][1], c.faces[0][2]);
  EXPECT_NE(a.content_hash(), c.content_hash());
}

TEST(Splats, CovarianceOfIdentityIsIdentity) {
  EXPECT_TRUE(covariance_from(Quat::Identity(), Vec3(1, 1, 1)).isApprox(Mat3::Identity(), 1e-15));
  const Quat q(Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()));
  const Mat3 s = covariance_from(q, Vec3(0.5, 2, 3));
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(s);
  EXPECT_NEAR(eig.eigenvalues()(0), 0.25, 1e-12);
  EXPECT_NEAR(eig.eigenvalues()(1), 4.0, 1e-12);
  EXPECT_NEAR(eig.eigenvalues()(2), 9.0, 1e-12);
}

TEST(Splats, AppendRejectsDegreeMismatch) {
  SplatSet a, b;
  a.sh_degree = 0;
  a.resize(2);
  b.sh_degree = 1;
  b.resize(1);
  EXPECT_THROW(a.append(b), InvariantError);
  SplatSet c;
  c.append(b);
  EXPECT_EQ(c.sh_degree, 1);
  EXPECT_EQ(c.sh_coeffs.size(), 12u);
}

TEST(Placement, RenderingPlacedAssetsEqualsRenderingBakedAssets) {
  testscenes::BuiltinScene nested = testscenes::gen_nested_scene();
  Placement p;
  p.rotation = Quat(Eigen::AngleAxisd(0.4, Vec3(0.3, 1, 0.2).normalized()));
  p.translation = Vec3(0.2, -0.1, 0.3);
  p.scale = 0.8;

  Scene placed = nested.scene;
  Scene baked = nested.scene;
  for (auto& o : placed.splat_objects) o.placement = p;
  for (auto& o : placed.mesh_objects) o.placement = p;
  for (auto& o : baked.splat_objects) o.splats = transform_splats(o.splats, p);
  for (auto& o : baked.mesh_objects) o.mesh = transform_mesh(o.mesh, p);

  Camera cam = nested.camera;
  cam.width = cam.height = 64;
  cam.fx = cam.fy = cam.fx / 4;
  cam.cx = cam.cy = 32;
  const Image a = render(placed, cam, {});
  const Image b = render(baked, cam, {});
  ASSERT_EQ(a.data.size(), b.data.size());
  for (std::size_t i = 0; i < a.data.size(); ++i) ASSERT_NEAR(a.data[i], b.data[i], 1e-6);
}

TEST(Settings, BlendModeNamesRoundTrip) {
  for (BlendMode m : {BlendMode::Naive, BlendMode::WholePixelEntity, BlendMode::PaperLiteral,
                      BlendMode::ExactEntity}) {
    EXPECT_EQ(parse_blend_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_blend_mode("fancy"), InputError);
}
