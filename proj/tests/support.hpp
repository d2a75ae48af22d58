// Helpers shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ntrack/deformgraph.hpp"
#include "ntrack/energy.hpp"
#include "ntrack/geometry.hpp"
#include "ntrack/warpfield.hpp"

namespace testing {

using ntrack::Vec2;
using ntrack::Vec3;
using ntrack::Mat3;

/// Fronto-parallel plane at depth z seen by `camera`.
inline ntrack::PointImage plane_points(int w, int h, const ntrack::CameraIntrinsics& camera,
                                       double z) {
  ntrack::DepthImage d(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) d.set(x, y, z);
  }
  return ntrack::PointImage::from_depth(d, camera);
}

/// Relative error with an absolute floor on the denominator.
inline double rel_error(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

template <class V>
double rel_error_vec(const V& a, const V& b, double floor = 1e-12) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

/// Central difference of a scalar function.
inline double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Rotation matrix from axis-angle, built independently of exp_so3 through
/// Eigen's AngleAxis.
Mat3 angle_axis(const Vec3& w);

inline Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

/// Random motion with rotations up to `angle` rad and translations up to
/// `shift` m per component.
inline ntrack::GraphMotion random_motion(std::size_t n, std::mt19937_64& rng, double angle,
                                         double shift) {
  ntrack::GraphMotion m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.rotations[i] = ntrack::exp_so3(random_vec(rng, angle));
    m.translations[i] = random_vec(rng, shift);
  }
  return m;
}

/// Perturbation of one motion coordinate: node i, coordinate c in 0..5
/// (eps x,y,z then t x,y,z).
inline ntrack::GraphMotion perturb(const ntrack::GraphMotion& m, std::size_t i, int c, double h) {
  ntrack::MotionDelta d(m.node_count());
  if (c < 3) d.rotation[i][c] = h;
  else d.translation[i][c - 3] = h;
  ntrack::GraphMotion out = m;
  out.rotations[i] = ntrack::exp_so3(d.rotation[i]) * m.rotations[i];
  out.translations[i] += d.translation[i];
  return out;
}

/// Largest relative errors between the analytic Jacobian and central
/// differences of the residual vector, per row block (2D, depth, reg).
/// Each column segment is compared as a vector, floored at `floor`.
inline std::array<double, 3> jacobian_fd_block_errors(const ntrack::TrackingProblem& problem,
                                                      const ntrack::GraphMotion& motion,
                                                      const ntrack::AssembleOptions& options,
                                                      double h = 1e-6, double floor = 1e-8) {
  const ntrack::ResidualSystem sys = ntrack::assemble(problem, motion, options);
  const Eigen::MatrixXd J = sys.dense_jacobian();
  const Eigen::Index n2 = 2 * static_cast<Eigen::Index>(sys.data.size());
  const Eigen::Index nd = static_cast<Eigen::Index>(sys.data.size());
  const Eigen::Index nr = 3 * static_cast<Eigen::Index>(sys.reg.size());
  const Eigen::Index begin[3] = {0, n2, n2 + nd};
  const Eigen::Index length[3] = {n2, nd, nr};
  std::array<double, 3> worst{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < motion.node_count(); ++i) {
    const int col = sys.node_column[i];
    if (col < 0) continue;
    for (int c = 0; c < 6; ++c) {
      const ntrack::ResidualSystem plus = ntrack::assemble(problem, perturb(motion, i, c, h), options);
      const ntrack::ResidualSystem minus = ntrack::assemble(problem, perturb(motion, i, c, -h), options);
      if (plus.rows() != sys.rows() || minus.rows() != sys.rows()) return {INFINITY, INFINITY, INFINITY};
      const Eigen::VectorXd fd = (plus.residual_vector() - minus.residual_vector()) / (2 * h);
      const Eigen::VectorXd an = J.col(6 * col + c);
      for (int b = 0; b < 3; ++b) {
        if (length[b] == 0) continue;
        const Eigen::VectorXd x = an.segment(begin[b], length[b]);
        const Eigen::VectorXd y = fd.segment(begin[b], length[b]);
        worst[b] = std::max(worst[b], rel_error_vec(x, y, floor));
      }
    }
  }
  return worst;
}

inline double jacobian_fd_error(const ntrack::TrackingProblem& problem,
                                const ntrack::GraphMotion& motion,
                                const ntrack::AssembleOptions& options, double h = 1e-6,
                                double floor = 1e-8) {
  const auto e = jacobian_fd_block_errors(problem, motion, options, h, floor);
  return std::max({e[0], e[1], e[2]});
}

}  // namespace testing

#include <Eigen/Geometry>

inline ntrack::Mat3 testing::angle_axis(const Vec3& w) {
  const double a = w.norm();
  if (a == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(a, w / a).toRotationMatrix();
}
