#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "ntrack/solver.hpp"

namespace ntrack {

/// Gradient of a scalar loss with respect to a GraphMotion. Rotations carry
/// the full 3x3 matrix gradient dL/dR_i; only its tangential part matters
/// since every R_i stays on SO(3).
struct MotionGradient {
  std::vector<Mat3> rotation;
  std::vector<Vec3> translation;

  explicit MotionGradient(std::size_t node_count = 0)
      : rotation(node_count, Mat3::Zero()), translation(node_count, Vec3::Zero()) {}

  std::size_t node_count() const { return rotation.size(); }
  MotionGradient& operator+=(const MotionGradient& other);

  /// dL/d eps_i for the left perturbation R_i -> exp(eps_i) R_i.
  std::vector<Vec3> tangent(const GraphMotion& motion) const;
  /// Matrix gradient equivalent to a tangent gradient at `motion`.
  static MotionGradient from_tangent(const GraphMotion& motion,
                                     const std::vector<Vec3>& rotation_tangent,
                                     const std::vector<Vec3>& translation);
};

struct InputGradients {
  std::vector<Vec2> target;    // dL/dc_u per correspondence
  std::vector<double> weight;  // dL/dw_u per correspondence
  std::vector<Vec3> final_translation;  // dL/dt_i at the solver output
};

struct LinearSolveGradient {
  Eigen::MatrixXd dA;
  Eigen::VectorXd db;
};

/// Adjoint of x = A^-1 b: db = A^-T dx (reusing the LU factors) and
/// dA = -db x^T.
LinearSolveGradient linear_solve_backward(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                                          const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& dx);

/// Reverse pass through every recorded Gauss-Newton iteration, including
/// the dependence of J_n and r_n on the intermediate motion T_n. Entries that
/// were masked or dropped in an iteration receive nothing from it.
InputGradients solver_backward(const TrackingProblem& problem, const ForwardTape& tape,
                               const MotionGradient& final_gradient);

}  // namespace ntrack
