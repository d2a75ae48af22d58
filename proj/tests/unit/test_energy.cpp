#include <doctest.h>

#include <cmath>
#include <random>

#include "ntrack/energy.hpp"
#include "ntrack/error.hpp"
#include "ntrack/synth.hpp"
#include "support.hpp"

using namespace ntrack;

namespace {

const CameraIntrinsics kCam{500, 500, 320, 240};
const std::array<int, 4> kFirst{0, -1, -1, -1};
const std::array<double, 4> kOne{1, 0, 0, 0};

DeformationGraph single_node(const Vec3& v) {
  DeformationGraph g;
  g.nodes = {v};
  g.edges = {{}};
  g.cluster_id = {0};
  return g;
}

struct SceneProblem {
  SyntheticScene scene;
  TrackingProblem problem() const {
    return {scene.camera, scene.source, scene.target, scene.graph, scene.skin,
            scene.correspondences};
  }
};

}  // namespace

TEST_SUITE("energy") {

TEST_CASE("2D residual examples") {
  const DeformationGraph g = single_node(Vec3(0, 0, 2));
  GraphMotion m(1);
  const Vec3 p(0, 0, 2);
  CHECK(residual_2d(p, project(p, kCam), 1.0, g, kFirst, kOne, m, kCam)->norm() == 0.0);
  m.translations[0] = Vec3(0.2, 0, 0);
  const auto r = residual_2d(p, {320, 240}, 1.0, g, kFirst, kOne, m, kCam);
  REQUIRE(r);
  CHECK((*r - Vec2(50, 0)).norm() < 1e-12);
  CHECK((*residual_2d(p, {320, 240}, 0.5, g, kFirst, kOne, m, kCam) - Vec2(25, 0)).norm() < 1e-12);
  m.translations[0] = Vec3(0, 0, -2.5);
  CHECK_FALSE(residual_2d(p, {320, 240}, 1.0, g, kFirst, kOne, m, kCam));
}

TEST_CASE("depth residual examples") {
  const DeformationGraph g = single_node(Vec3(0, 0, 1));
  PointImage target = testing::plane_points(4, 4, {2, 2, 1.5, 1.5}, 1.0);
  GraphMotion m(1);
  const Vec3 p(0, 0, 1);
  CHECK(*residual_depth(p, {1.5, 1.5}, 1.0, g, kFirst, kOne, m, target) == 0.0);
  m.translations[0] = Vec3(0, 0, 0.3);
  CHECK(*residual_depth(p, {1.5, 1.5}, 0.7, g, kFirst, kOne, m, target) ==
        doctest::Approx(0.3 * 0.7).epsilon(1e-14));
  CHECK_FALSE(residual_depth(p, {4.5, 1}, 1.0, g, kFirst, kOne, m, target));
  target.invalidate(target.index(2, 2));
  CHECK_FALSE(residual_depth(p, {1.5, 1.5}, 1.0, g, kFirst, kOne, m, target));
}

TEST_CASE("ARAP residual examples") {
  DeformationGraph g;
  g.nodes = {Vec3(0, 0, 0), Vec3(0.1, 0, 0)};
  g.edges = {{1}, {0}};
  g.cluster_id = {0, 0};
  GraphMotion m(2);
  CHECK(residual_reg(0, 1, g, m).norm() == 0.0);
  m.translations = {Vec3(0.3, -0.2, 0.1), Vec3(0.3, -0.2, 0.1)};
  CHECK(residual_reg(0, 1, g, m).norm() < 1e-16);
  m = GraphMotion(2);
  m.rotations[0] = exp_so3(Vec3(0, 0, M_PI / 2));
  CHECK((residual_reg(0, 1, g, m) - Vec3(-0.1, 0.1, 0)).norm() < 1e-15);
}

TEST_CASE("ARAP null space under global rigid motions") {
  const SyntheticScene s = generate_scene(SceneKind::kArticulatedBend, 64, 48, 1);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const GraphMotion m =
        rigid_motion(s.graph, exp_so3(testing::random_vec(rng, M_PI)), testing::random_vec(rng, 1.0));
    for (std::size_t i = 0; i < s.graph.node_count(); ++i) {
      for (int j : s.graph.edges[i]) {
        CHECK(residual_reg(static_cast<int>(i), j, s.graph, m).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("assembled Jacobian matches central differences") {
  std::mt19937_64 rng(13);
  for (SceneKind kind : {SceneKind::kRigid, SceneKind::kSmoothSine}) {
    SceneProblem sp{generate_scene(kind, 48, 36, 2)};
    const TrackingProblem prob = sp.problem();
    AssembleOptions opt;
    for (int trial = 0; trial < 3; ++trial) {
      const GraphMotion m = testing::random_motion(sp.scene.graph.node_count(), rng, 0.02, 0.005);
      CHECK(testing::jacobian_fd_error(prob, m, opt) < 1e-5);
    }
    opt.weights.reweight_edges_by_length = true;
    opt.weights.lambda_2d = 0.5;
    CHECK(testing::jacobian_fd_error(prob, GraphMotion(sp.scene.graph.node_count()), opt) < 1e-5);
  }
}

TEST_CASE("row bookkeeping") {
  SceneProblem sp{generate_scene(SceneKind::kTwoCluster, 48, 36, 3)};
  const TrackingProblem prob = sp.problem();
  const ResidualSystem sys = assemble(prob, GraphMotion(sp.scene.graph.node_count()), {});
  CHECK(sys.rows() == 3 * sys.data.size() + 3 * sp.scene.graph.edge_count());
  CHECK(sys.unknowns() == 6 * static_cast<int>(sp.scene.graph.node_count()));
  const Eigen::VectorXd r = sys.residual_vector();
  CHECK(r.size() == static_cast<Eigen::Index>(sys.rows()));
  CHECK(r.squaredNorm() == doctest::Approx(sys.squared_norm()));
  const std::size_t nd = sys.data.size();
  CHECK(sys.row_source(0).kind == ResidualSystem::RowKind::k2dX);
  CHECK(sys.row_source(1).kind == ResidualSystem::RowKind::k2dY);
  CHECK(sys.row_source(2 * nd).kind == ResidualSystem::RowKind::kDepth);
  CHECK(sys.row_source(2 * nd).block == 0);
  const auto last = sys.row_source(sys.rows() - 1);
  CHECK(last.kind == ResidualSystem::RowKind::kReg);
  CHECK(last.component == 2);
  CHECK(last.block == static_cast<int>(sys.reg.size()) - 1);
  CHECK_THROWS_AS(sys.row_source(sys.rows()), Error);

  SUBCASE("normal equations equal the dense product") {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    std::mt19937_64 rng(1);
    const GraphMotion m = testing::random_motion(sp.scene.graph.node_count(), rng, 0.01, 0.01);
    const ResidualSystem s2 = assemble(prob, m, {});
    s2.normal_equations(A, b, 0.25);
    const Eigen::MatrixXd J = s2.dense_jacobian();
    const Eigen::MatrixXd expected = J.transpose() * J + 0.25 * Eigen::MatrixXd::Identity(J.cols(), J.cols());
    CHECK((A - expected).norm() < 1e-9 * expected.norm());
    CHECK((b + J.transpose() * s2.residual_vector()).norm() < 1e-9 * (1 + b.norm()));
  }
}

TEST_CASE("perfect correspondences give zero residual") {
  SceneOptions still;
  still.deform.rotation = Vec3::Zero();
  still.deform.translation = Vec3::Zero();
  SceneProblem sp{generate_scene(SceneKind::kRigid, 48, 36, 4, still)};
  const ResidualSystem sys = assemble(sp.problem(), GraphMotion(sp.scene.graph.node_count()), {});
  CHECK(sys.data_squared_norm() < 1e-20);
  CHECK(sys.squared_norm() < 1e-20);
}

TEST_CASE("doubling a weight doubles its data rows") {
  SceneProblem sp{generate_scene(SceneKind::kRigid, 48, 36, 5)};
  const GraphMotion m(sp.scene.graph.node_count());
  const ResidualSystem a = assemble(sp.problem(), m, {});
  const int k = a.data.front().correspondence;
  sp.scene.correspondences.entries[k].weight = 2.0;
  const ResidualSystem b = assemble(sp.problem(), m, {});
  CHECK((b.data.front().residual - 2.0 * a.data.front().residual).norm() < 1e-14);
  for (int s = 0; s < a.data.front().support; ++s) {
    CHECK((b.data.front().jacobian[s] - 2.0 * a.data.front().jacobian[s]).norm() < 1e-12);
  }
}

TEST_CASE("masks, drops and the underdetermined error") {
  SceneProblem sp{generate_scene(SceneKind::kRigid, 48, 36, 6)};
  const GraphMotion m(sp.scene.graph.node_count());
  auto& entries = sp.scene.correspondences.entries;
  const ResidualSystem full = assemble(sp.problem(), m, {});

  AssembleOptions opt;
  opt.correspondence_mask.assign(entries.size(), 1);
  opt.correspondence_mask[full.data.front().correspondence] = 0;
  CHECK(assemble(sp.problem(), m, opt).data.size() == full.data.size() - 1);

  entries[full.data.front().correspondence].target = Vec2(-5, 3);
  const ResidualSystem dropped = assemble(sp.problem(), m, {});
  REQUIRE(dropped.dropped.size() == 1);
  CHECK(dropped.dropped.front().reason == DropReason::kTargetInvalid);

  for (auto& c : entries) c.valid = false;
  try {
    assemble(sp.problem(), m, {});
    FAIL("expected underdetermined");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnderdetermined);
  }
  opt = {};
  opt.require_data = false;
  CHECK(assemble(sp.problem(), m, opt).data.empty());
}

}  // TEST_SUITE
