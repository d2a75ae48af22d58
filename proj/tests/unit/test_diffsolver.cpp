#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/QR>

#include "ntrack/diffsolver.hpp"
#include "ntrack/synth.hpp"
#include "ntrack/weights.hpp"
#include "support.hpp"

using namespace ntrack;

namespace {

Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n * n; ++i) m.data()[i] = g(rng);
  return m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

// Two nodes on an 8x8 plane, 20 correspondences from a small rigid motion
// plus noise, and a loss against arbitrary node targets.
struct TinyProblem {
  CameraIntrinsics camera{40, 40, 3.5, 3.5};
  PointImage source, target;
  DeformationGraph graph;
  SkinningTable skin;
  CorrespondenceSet corr;
  std::vector<Vec3> truth{Vec3(0.004, -0.002, 0.01), Vec3(0.006, 0.001, 0.012)};
  SceneFlow flow{8, 8};
  std::vector<std::uint8_t> no_mask;

  TinyProblem() {
    source = testing::plane_points(8, 8, camera, 1.0);
    DepthImage d(8, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) d.set(x, y, 1.01 + 0.002 * x - 0.001 * y);
    }
    target = PointImage::from_depth(d, camera);
    graph.nodes = {Vec3(-0.03, 0, 1), Vec3(0.03, 0, 1)};
    graph.edges = {{1}, {0}};
    graph.cluster_id = {0, 0};
    graph.sigma = 0.05;
    skin = compute_skinning(source, graph.nodes, 0.05);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> noise(-0.4, 0.4), w(0.3, 0.9);
    const Mat3 r = exp_so3(Vec3(0.01, -0.02, 0.015));
    for (int y = 2; y < 6; ++y) {
      for (int x = 1; x < 6; ++x) {
        const Vec3 p = source.point(x, y);
        const Vec2 c = project(r * p + Vec3(0.003, 0.002, 0.01), camera) + Vec2(noise(rng), noise(rng));
        corr.entries.push_back({x, y, c, w(rng), true});
      }
    }
  }

  TrackingProblem problem(const CorrespondenceSet& set) const {
    return {camera, source, target, graph, skin, set};
  }
  LossTargets targets() const { return {truth, no_mask, flow, no_mask, 1.0, 1.0}; }

  double loss(const CorrespondenceSet& set, const SolverConfig& c) const {
    const TrackingProblem p = problem(set);
    const SolveResult r = gauss_newton_solve(p, c);
    return tracking_loss(p, r.motion, targets(), r.active_nodes).value;
  }
};

SolverConfig tiny_config() {
  SolverConfig c;
  c.max_iter = 3;
  c.min_cluster_correspondences = 1;
  return c;
}

}  // namespace

TEST_SUITE("diffsolver") {

TEST_CASE("linear solve adjoint with the identity") {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(6, 6);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd x = random_vector(6, rng), dx = random_vector(6, rng);
  const LinearSolveGradient g = linear_solve_backward(lu, x, dx);
  CHECK((g.db - dx).norm() < 1e-15);
  CHECK((g.dA + dx * x.transpose()).norm() < 1e-15);
  const LinearSolveGradient z = linear_solve_backward(lu, x, Eigen::VectorXd::Zero(6));
  CHECK(z.db.norm() == 0.0);
  CHECK(z.dA.norm() == 0.0);
}

TEST_CASE("linear solve adjoint matches perturbations") {
  std::mt19937_64 rng(2);
  for (int n : {12, 30, 60}) {
    const Eigen::MatrixXd A = random_spd(n, rng);
    const Eigen::VectorXd b = random_vector(n, rng);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const Eigen::VectorXd x = lu.solve(b);
    const Eigen::VectorXd dx = random_vector(n, rng);
    const LinearSolveGradient g = linear_solve_backward(lu, x, dx);
    const Eigen::MatrixXd dA_dir = random_spd(n, rng) * 0.1;
    const Eigen::VectorXd db_dir = random_vector(n, rng);
    // Tangent of x = A^-1 b, through an independent QR solver.
    const Eigen::VectorXd tangent = A.householderQr().solve(db_dir - dA_dir * x);
    const double lhs = dx.dot(tangent);
    const double rhs = g.db.dot(db_dir) + (g.dA.array() * dA_dir.array()).sum();
    CHECK(testing::rel_error(lhs, rhs) < 1e-9);

    const double h = 1e-6;
    const Eigen::VectorXd xp = (A + h * dA_dir).householderQr().solve(b + h * db_dir);
    const Eigen::VectorXd xm = (A - h * dA_dir).householderQr().solve(b - h * db_dir);
    CHECK(testing::rel_error(dx.dot(xp - xm) / (2 * h), rhs) < 1e-6);
  }
}

TEST_CASE("motion gradient tangent round trip") {
  std::mt19937_64 rng(3);
  const GraphMotion m = testing::random_motion(4, rng, 1.0, 0.1);
  std::vector<Vec3> rot, trans;
  for (int i = 0; i < 4; ++i) {
    rot.push_back(testing::random_vec(rng, 1.0));
    trans.push_back(testing::random_vec(rng, 1.0));
  }
  const MotionGradient g = MotionGradient::from_tangent(m, rot, trans);
  const auto back = g.tangent(m);
  for (int i = 0; i < 4; ++i) {
    CHECK((back[i] - rot[i]).norm() < 1e-12);
    CHECK((g.translation[i] - trans[i]).norm() == 0.0);
  }
}

TEST_CASE("no gradient when the solve already hits the loss minimum") {
  const TinyProblem t;
  const TrackingProblem p = t.problem(t.corr);
  const SolveResult r = gauss_newton_solve(p, tiny_config());
  const std::vector<std::uint8_t> none;
  const LossTargets targets{r.motion.translations, none, t.flow, none, 1.0, 0.0};
  const MotionLoss loss = tracking_loss(p, r.motion, targets, r.active_nodes);
  CHECK(loss.value == 0.0);
  const InputGradients g = solver_backward(p, r.tape, loss.grad);
  for (std::size_t k = 0; k < t.corr.size(); ++k) {
    CHECK(g.weight[k] == 0.0);
    CHECK(g.target[k].norm() == 0.0);
  }
}

TEST_CASE("end-to-end gradients match finite differences") {
  const TinyProblem t;
  const SolverConfig c = tiny_config();
  const TrackingProblem p = t.problem(t.corr);
  const SolveResult r = gauss_newton_solve(p, c);
  const MotionLoss loss = tracking_loss(p, r.motion, t.targets(), r.active_nodes);
  const InputGradients g = solver_backward(p, r.tape, loss.grad);
  REQUIRE(g.weight.size() == t.corr.size());

  double gmax_w = 0.0, gmax_c = 0.0;
  for (std::size_t k = 0; k < t.corr.size(); ++k) {
    gmax_w = std::max(gmax_w, std::abs(g.weight[k]));
    gmax_c = std::max({gmax_c, std::abs(g.target[k].x()), std::abs(g.target[k].y())});
  }
  for (std::size_t k = 0; k < t.corr.size(); ++k) {
    CorrespondenceSet plus = t.corr, minus = t.corr;
    plus.entries[k].weight += 1e-5;
    minus.entries[k].weight -= 1e-5;
    const double nw = (t.loss(plus, c) - t.loss(minus, c)) / 2e-5;
    CHECK(testing::rel_error(g.weight[k], nw, 1e-6 * gmax_w) < 1e-4);
    for (int d = 0; d < 2; ++d) {
      plus = t.corr;
      minus = t.corr;
      plus.entries[k].target[d] += 1e-4;
      minus.entries[k].target[d] -= 1e-4;
      const double nc = (t.loss(plus, c) - t.loss(minus, c)) / 2e-4;
      CHECK(testing::rel_error(g.target[k][d], nc, 1e-6 * gmax_c) < 1e-4);
    }
  }
}

TEST_CASE("masked and invalid entries receive no gradient") {
  TinyProblem t;
  t.corr.entries[3].valid = false;
  SolverConfig c = tiny_config();
  c.correspondence_subsample = 15;
  c.seed = 4;
  const TrackingProblem p = t.problem(t.corr);
  const SolveResult r = gauss_newton_solve(p, c);
  const MotionLoss loss = tracking_loss(p, r.motion, t.targets(), r.active_nodes);
  const InputGradients g = solver_backward(p, r.tape, loss.grad);
  int zeroed = 0;
  for (std::size_t k = 0; k < t.corr.size(); ++k) {
    if (r.correspondence_mask[k] && t.corr.entries[k].valid) {
      CHECK(g.weight[k] != 0.0);
      continue;
    }
    CHECK(g.weight[k] == 0.0);
    CHECK(g.target[k].norm() == 0.0);
    ++zeroed;
  }
  CHECK(zeroed == 5);
}

}  // TEST_SUITE
