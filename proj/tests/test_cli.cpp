#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "unigs/binding.hpp"
#include "unigs/cli.hpp"
#include "unigs/io.hpp"
#include "unigs/oracle.hpp"
#include "unigs/testscenes.hpp"

using namespace unigs;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("unigs_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// NeRF transforms: camera-to-world with -z forward and +y up.
void write_cameras(const std::vector<Camera>& cams, const fs::path& path) {
  std::ofstream f(path);
  f << std::setprecision(17) << "{\"frames\": [";
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const Camera& c = cams[i];
    const Mat3 r = c.rotation.transpose() * Vec3(1, -1, -1).asDiagonal();
    const Vec3 t = c.center();
    f << (i ? "," : "") << "{\"file_path\": \"cam" << i << "\", \"w\": " << c.width << ", \"h\": " << c.height
      << ", \"fl_x\": " << c.fx << ", \"transform_matrix\": [";
    for (int row = 0; row < 3; ++row) {
      f << "[" << r(row, 0) << "," << r(row, 1) << "," << r(row, 2) << "," << t[row] << "],";
    }
    f << "[0,0,0,1]]}";
  }
  f << "]}";
}

}  // namespace

TEST(Cli, HelpAndUnknownCommand) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
}

TEST(Cli, DiffIdenticalAndOpposite) {
  const fs::path dir = scratch("diff");
  write_image(Image(1, 1, Rgb(0, 0, 0)), (dir / "black.pfm").string());
  write_image(Image(1, 1, Rgb(1, 1, 1)), (dir / "white.pfm").string());
  write_image(Image(2, 1, Rgb(1, 1, 1)), (dir / "wide.pfm").string());

  Result r = run_cli({"diff", (dir / "black.pfm").string(), (dir / "black.pfm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"psnr\": \"inf\""), std::string::npos) << r.out;

  r = run_cli({"diff", (dir / "black.pfm").string(), (dir / "white.pfm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"mean_abs_error\": 1.0"), std::string::npos) << r.out;

  r = run_cli({"diff", (dir / "black.pfm").string(), (dir / "wide.pfm").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("size mismatch"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  Result r = run_cli({"bench", "--builtin", "empty", "--iterations", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--iterations"), std::string::npos);

  const fs::path dir = scratch("usage");
  std::ofstream(dir / "scene.json") << R"({"objects": [{"type": "splats", "path": "missing.ply"}]})";
  r = run_cli({"render", "--config", (dir / "scene.json").string(), "--out", (dir / "x.png").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.ply"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "x.png"));

  r = run_cli({"render", "--builtin", "nope", "--out", (dir / "y.png").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown builtin"), std::string::npos);
}

TEST(Cli, RenderModesAndOracleDiff) {
  const fs::path dir = scratch("render");
  Result r = run_cli({"render", "--builtin", "edge", "--out", (dir / "exact.pfm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run_cli({"render", "--builtin", "edge", "--mode", "naive", "--out", (dir / "naive.pfm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("naive"), std::string::npos);

  const testscenes::BuiltinScene s = testscenes::gen_edge_scene();
  const Image exact = read_image((dir / "exact.pfm").string());
  EXPECT_EQ(exact.data, render(s.scene, s.camera, s.settings).data);
  const Image ref = oracle::supersample_render(s.scene, s.camera, 8, s.settings).pixels;
  const Image naive = read_image((dir / "naive.pfm").string());
  EXPECT_LT(diff_images(exact, ref).mean_abs_error, diff_images(naive, ref).mean_abs_error);

  r = run_cli({"diff", "--builtin", "edge", "--samples", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"samples_per_axis\": 4"), std::string::npos);

  r = run_cli({"render", "--builtin", "overflow", "--width", "32", "--height", "16", "--out",
               (dir / "small.png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Image small = read_image((dir / "small.png").string());
  EXPECT_EQ(small.width, 32);
  EXPECT_EQ(small.height, 16);
}

TEST(Cli, BindThenDeformEndToEnd) {
  const fs::path dir = scratch("deform");
  const TriMesh mesh = testscenes::gen_icosphere(2);
  const SplatSet splats = testscenes::gen_splats_on_surface(mesh, 60, 2);
  const auto cams = testscenes::gen_orbit_cameras(4);
  write_obj(mesh, (dir / "rest.obj").string());
  save_splat_ply(splats, (dir / "splats.ply").string());
  write_cameras(cams, dir / "cams.json");

  Result r = run_cli({"bind", "--splats", (dir / "splats.ply").string(), "--mesh", (dir / "rest.obj").string(),
                      "--cameras", (dir / "cams.json").string(), "--mode", "bbx8", "--out",
                      (dir / "bind.bin").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const BindingTable table = load_binding((dir / "bind.bin").string());
  EXPECT_EQ(table.anchors.size(), 480u);
  // The written cameras must reproduce the in-memory binding.
  const BindingTable direct = unigs::bind(load_splat_ply((dir / "splats.ply").string()),
                                          load_obj((dir / "rest.obj").string()), cams, BindMode::Bbx8);
  ASSERT_EQ(direct.anchors.size(), table.anchors.size());
  for (std::size_t i = 0; i < table.anchors.size(); ++i) EXPECT_EQ(direct.anchors[i].face, table.anchors[i].face);

  const Vec3 t0(0.25, 0.5, -1.0);
  fs::create_directories(dir / "frames");
  for (int k = 0; k < 2; ++k) {
    TriMesh moved = mesh;
    for (Vec3& p : moved.vertices) p += (k + 1) * t0;
    write_obj(moved, (dir / "frames" / ("f" + std::to_string(k) + ".obj")).string());
  }
  r = run_cli({"deform", "--splats", (dir / "splats.ply").string(), "--binding", (dir / "bind.bin").string(),
               "--rest-mesh", (dir / "rest.obj").string(), "--deformed-mesh", (dir / "frames").string(), "--out",
               (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const SplatSet original = load_splat_ply((dir / "splats.ply").string());
  for (int k = 0; k < 2; ++k) {
    const SplatSet moved = load_splat_ply((dir / "out" / ("f" + std::to_string(k) + ".ply")).string());
    ASSERT_EQ(moved.size(), original.size());
    for (std::size_t i = 0; i < moved.size(); ++i) {
      // PLY stores float32, so compare at single precision.
      ASSERT_LT((moved.positions[i] - original.positions[i] - (k + 1) * t0).norm(), 1e-5);
    }
  }

  // A binding used against a different rest mesh is refused.
  write_obj(testscenes::gen_icosphere(1), (dir / "other.obj").string());
  r = run_cli({"deform", "--splats", (dir / "splats.ply").string(), "--binding", (dir / "bind.bin").string(),
               "--rest-mesh", (dir / "other.obj").string(), "--deformed-mesh", (dir / "other.obj").string(),
               "--out", (dir / "bad.ply").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir / "bad.ply"));
}

TEST(Cli, BenchReportsBothConfigurations) {
  const fs::path dir = scratch("bench");
  Result r = run_cli({"bench", "--builtin", "overflow", "--iterations", "3", "--warmup", "1", "--out",
                      (dir / "bench.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* key : {"gaussians_only", "gaussians_and_mesh", "median_ms", "ratio_median"}) {
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  }
  EXPECT_TRUE(fs::exists(dir / "bench.json"));
}
