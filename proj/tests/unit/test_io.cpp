#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ntrack/error.hpp"
#include "ntrack/io.hpp"
#include "ntrack/solver.hpp"
#include "ntrack/synth.hpp"
#include "support.hpp"

using namespace ntrack;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ntrack_io_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
            std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ntrack::Error");
  return ErrorCode::kInvalidInput;
}

float as_f32(const std::vector<unsigned char>& b, std::size_t at) {
  float v;
  std::memcpy(&v, b.data() + at, 4);
  return v;
}

std::uint32_t as_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("DGN1 depth") {
  TempDir dir;
  DepthImage d(3, 2);
  d.set(0, 0, 1.25);
  d.set(1, 0, 0.0);
  d.set(2, 1, 2.5);
  io::write_depth_dgn(dir / "d.dgn", d);
  const auto bytes = io::read_file(dir / "d.dgn");
  REQUIRE(bytes.size() == 12 + 4 * 6);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DGN1");
  CHECK(as_u32(bytes, 4) == 3);
  CHECK(as_u32(bytes, 8) == 2);
  CHECK(as_f32(bytes, 12) == 1.25f);
  CHECK(as_f32(bytes, 12 + 4 * 5) == 2.5f);
  const DepthImage r = io::read_depth(dir / "d.dgn");
  CHECK(r.width() == 3);
  CHECK(r.valid(0, 0));
  CHECK(r.depth(0, 0) == 1.25);
  CHECK_FALSE(r.valid(1, 0));
  CHECK_FALSE(r.valid(1, 1));

  io::write_file(dir / "bad.dgn", "DGN1\x03");
  CHECK(code_of([&] { io::read_depth(dir / "bad.dgn"); }) == ErrorCode::kInvalidInput);
  CHECK(code_of([&] { io::read_depth(dir / "missing.dgn"); }) == ErrorCode::kIo);
}

TEST_CASE("PNG depth in millimeters") {
  TempDir dir;
  DepthImage d(4, 3);
  d.set(0, 0, 1.2344);
  d.set(3, 2, 0.5);
  io::write_depth_png(dir / "d.png", d);
  const DepthImage r = io::read_depth(dir / "d.png");
  CHECK(r.width() == 4);
  CHECK(r.height() == 3);
  CHECK(r.depth(0, 0) == doctest::Approx(1.234).epsilon(1e-12));
  CHECK(r.depth(3, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(r.valid(1, 1));
}

TEST_CASE("intrinsics and graph JSON") {
  TempDir dir;
  const CameraIntrinsics c{525.5, 524.25, 319.75, 239.5};
  io::write_intrinsics(dir / "k.json", c);
  const CameraIntrinsics r = io::read_intrinsics(dir / "k.json");
  CHECK(r.fx == c.fx);
  CHECK(r.fy == c.fy);
  CHECK(r.cx == c.cx);
  CHECK(r.cy == c.cy);
  io::write_file(dir / "bad.json", R"({"fx": 1, "fy": 1, "cx": 0})");
  CHECK(code_of([&] { io::read_intrinsics(dir / "bad.json"); }) == ErrorCode::kInvalidInput);

  const SyntheticScene s = generate_scene(SceneKind::kTwoCluster, 48, 36, 1);
  io::write_graph(dir / "g.json", s.graph);
  const DeformationGraph g = io::read_graph(dir / "g.json");
  CHECK(g.nodes == s.graph.nodes);
  CHECK(g.edges == s.graph.edges);
  CHECK(g.cluster_id == s.graph.cluster_id);
  CHECK(g.sigma == s.graph.sigma);
  io::write_file(dir / "loop.json", R"({"nodes": [[0,0,1]], "edges": [[0]], "clusters": [0], "sigma": 0.05})");
  CHECK(code_of([&] { io::read_graph(dir / "loop.json"); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("SKN1 skinning") {
  TempDir dir;
  const SyntheticScene s = generate_scene(SceneKind::kSmoothSine, 48, 36, 2);
  io::write_skinning(dir / "s.skn", s.skin);
  const auto bytes = io::read_file(dir / "s.skn");
  CHECK(bytes.size() == 12 + 32 * s.skin.size());
  const SkinningTable r = io::read_skinning(dir / "s.skn");
  CHECK(r.width() == 48);
  for (std::size_t px = 0; px < s.skin.size(); ++px) {
    REQUIRE(r.supported(px) == s.skin.supported(px));
    if (!r.supported(px)) continue;
    CHECK(r.nodes(px) == s.skin.nodes(px));
    double sum = 0;
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(r.weights(px)[k] - s.skin.weights(px)[k]) < 1e-7);
      sum += r.weights(px)[k];
    }
    CHECK(std::abs(sum - 1.0) < 1e-15);
  }
}

TEST_CASE("motion JSON") {
  TempDir dir;
  std::mt19937_64 rng(3);
  const GraphMotion m = testing::random_motion(5, rng, 1.0, 0.2);
  io::write_motion(dir / "m.json", m);
  const GraphMotion r = io::read_motion(dir / "m.json");
  REQUIRE(r.node_count() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(r.rotations[i] == m.rotations[i]);
    CHECK(r.translations[i] == m.translations[i]);
  }
  const auto bytes = io::read_file(dir / "m.json");
  CHECK(std::string(bytes.begin(), bytes.end()) == io::motion_to_json(m));
  CHECK(io::motion_to_json(m).back() == '\n');
}

TEST_CASE("COR1 correspondences") {
  TempDir dir;
  CorrespondenceSet c;
  c.entries.push_back({3, 4, Vec2(1.5, 2.25), 0.75, true});
  c.entries.push_back({65535, 0, Vec2(-1, 0), 1.0, false});
  io::write_correspondences(dir / "c.cor", c);
  const auto b = io::read_file(dir / "c.cor");
  REQUIRE(b.size() == 8 + 17 * 2);
  CHECK(std::string(b.begin(), b.begin() + 4) == "COR1");
  CHECK(as_u32(b, 4) == 2);
  CHECK(b[8] == 3);
  CHECK(b[9] == 0);
  CHECK(b[10] == 4);
  CHECK(as_f32(b, 12) == 1.5f);
  CHECK(as_f32(b, 16) == 2.25f);
  CHECK(as_f32(b, 20) == 0.75f);
  CHECK(b[24] == 1);
  CHECK(b[25] == 0xFF);
  CHECK(b[26] == 0xFF);
  CHECK(b[41] == 0);
  const CorrespondenceSet r = io::read_correspondences(dir / "c.cor");
  REQUIRE(r.size() == 2);
  CHECK(r.entries[0].ux == 3);
  CHECK(r.entries[0].target == Vec2(1.5, 2.25));
  CHECK(r.entries[0].weight == 0.75);
  CHECK(r.entries[1].ux == 65535);
  CHECK_FALSE(r.entries[1].valid);

  io::write_file(dir / "short.cor", std::string(reinterpret_cast<const char*>(b.data()), b.size() - 1));
  CHECK(code_of([&] { io::read_correspondences(dir / "short.cor"); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("SFL1 flow and MSK1 masks") {
  TempDir dir;
  SceneFlow f(2, 2);
  f.flow[0] = Vec3(0.5, -0.25, 0.125);
  f.valid[0] = 1;
  f.flow[3] = Vec3(1, 2, 3);
  f.valid[3] = 1;
  io::write_scene_flow(dir / "f.bin", f);
  const auto b = io::read_file(dir / "f.bin");
  REQUIRE(b.size() == 12 + 12 * 4);
  CHECK(std::isnan(as_f32(b, 12 + 12)));
  const SceneFlow r = io::read_scene_flow(dir / "f.bin");
  CHECK(r.valid == f.valid);
  CHECK(r.flow[0] == f.flow[0]);
  CHECK(r.flow[3] == f.flow[3]);

  io::SceneMasks m{2, 2, {1, 0, 1, 1}, {0, 1, 1, 0}, {1, 0, 1}};
  io::write_masks(dir / "m.bin", m);
  CHECK(io::read_file(dir / "m.bin").size() == 16 + 4 + 4 + 3);
  const io::SceneMasks rm = io::read_masks(dir / "m.bin");
  CHECK(rm.corr_mask == m.corr_mask);
  CHECK(rm.flow_mask == m.flow_mask);
  CHECK(rm.node_mask == m.node_mask);
}

TEST_CASE("scene directory round trip") {
  TempDir dir;
  const SyntheticScene s = generate_scene(SceneKind::kArticulatedBend, 64, 48, 4);
  io::save_scene(s, dir.path);
  for (const char* name : {"source.dgn", "target.dgn", "intrinsics.json", "corr.cor", "graph.json",
                           "skinning.skn", "gt_motion.json", "scene_flow.bin", "masks.bin", "scene.json"}) {
    CHECK(fs::exists(dir / name));
  }
  const SyntheticScene r = io::load_scene(dir.path);
  CHECK(r.kind == s.kind);
  CHECK(r.seed == s.seed);
  CHECK(r.width == 64);
  CHECK(r.source.valid_count() == s.source.valid_count());
  CHECK(r.graph.node_count() == s.graph.node_count());
  CHECK(r.corr_mask == s.corr_mask);
  CHECK(r.node_mask == s.node_mask);
  CHECK(r.correspondences.size() == s.correspondences.size());
  for (std::size_t i = 0; i < s.graph.node_count(); ++i) {
    CHECK((r.gt_motion.translations[i] - s.gt_motion.translations[i]).norm() == 0.0);
  }
  for (std::size_t px = 0; px < s.source.size(); ++px) {
    if (!s.source.valid(px)) continue;
    CHECK((r.source.point(px) - s.source.point(px)).norm() < 1e-6);
  }
  // Solving the loaded scene still recovers the deformation.
  const TrackingProblem p{r.camera, r.source, r.target, r.graph, r.skin, r.correspondences};
  SolverConfig c;
  c.min_cluster_correspondences = 20;
  const SolveResult sol = gauss_newton_solve(p, c);
  CHECK(evaluate_metrics(r.source, r.graph, r.skin, sol.motion, r.flow, r.gt_translations()).epe3d < 2e-3);
}

}  // TEST_SUITE
