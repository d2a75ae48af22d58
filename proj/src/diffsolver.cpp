#include "ntrack/diffsolver.hpp"

#include <string>

#include "ntrack/error.hpp"

namespace ntrack {

MotionGradient& MotionGradient::operator+=(const MotionGradient& other) {
  if (other.node_count() != node_count()) {
    throw Error(ErrorCode::kInvalidInput, "MotionGradient: node count mismatch");
  }
  for (std::size_t i = 0; i < node_count(); ++i) {
    rotation[i] += other.rotation[i];
    translation[i] += other.translation[i];
  }
  return *this;
}

std::vector<Vec3> MotionGradient::tangent(const GraphMotion& motion) const {
  std::vector<Vec3> out(node_count(), Vec3::Zero());
  for (std::size_t i = 0; i < node_count(); ++i) {
    // <G, hat(e_k) R> = <G R^T, hat(e_k)>
    const Mat3 m = rotation[i] * motion.rotations[i].transpose();
    out[i] = {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
  }
  return out;
}

MotionGradient MotionGradient::from_tangent(const GraphMotion& motion,
                                            const std::vector<Vec3>& rotation_tangent,
                                            const std::vector<Vec3>& translation) {
  const std::size_t n = motion.node_count();
  if (rotation_tangent.size() != n || translation.size() != n) {
    throw Error(ErrorCode::kInvalidInput, "MotionGradient: node count mismatch");
  }
  MotionGradient g(n);
  for (std::size_t i = 0; i < n; ++i) {
    // <hat(g) R, hat(d) R> = 2 g.d
    g.rotation[i] = 0.5 * hat(rotation_tangent[i]) * motion.rotations[i];
    g.translation[i] = translation[i];
  }
  return g;
}

LinearSolveGradient linear_solve_backward(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu,
                                          const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& dx) {
  if (x.size() != lu.rows() || dx.size() != lu.rows()) {
    throw Error(ErrorCode::kInvalidInput, "linear_solve_backward: size mismatch");
  }
  if (!(lu.rcond() >= kSingularRcond)) {
    throw Error(ErrorCode::kSingularSystem, "linear_solve_backward: singular system");
  }
  LinearSolveGradient g;
  g.db = lu.transpose().solve(dx);
  g.dA = -g.db * x.transpose();
  return g;
}

namespace {

// Gradient with respect to b of <G, hat(b)>.
Vec3 hat_adjoint(const Mat3& g) {
  return {g(2, 1) - g(1, 2), g(0, 2) - g(2, 0), g(1, 0) - g(0, 1)};
}

using Vec6 = Eigen::Matrix<double, 6, 1>;

Vec6 column_block(const Eigen::VectorXd& v, int column) {
  return v.segment<6>(6 * column);
}

void backward_data(const DataBlock& blk, const ResidualSystem& sys, const TrackingProblem& problem,
                   const GraphMotion& motion, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& gb, MotionGradient& gT, InputGradients& out) {
  const int m = blk.support;
  const double s2 = sys.sqrt_lambda_2d;
  const double sd = sys.sqrt_lambda_depth;
  const double w = blk.weight;
  const CameraIntrinsics& cam = problem.camera;

  // u = J_rho gb, v = J_rho x over this block's three rows.
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  std::array<Vec6, SkinningTable::kSupport> xb{}, gbb{};
  for (int s = 0; s < m; ++s) {
    const int col = sys.node_column[blk.nodes[s]];
    xb[s] = column_block(x, col);
    gbb[s] = column_block(gb, col);
    u += blk.jacobian[s] * gbb[s];
    v += blk.jacobian[s] * xb[s];
  }
  // With dA = -gb x^T: dJ = J (dA + dA^T) - r gb^T and dr = -J gb.
  const Eigen::Vector3d gr = -u;
  std::array<Mat36, SkinningTable::kSupport> gJ{};
  for (int s = 0; s < m; ++s) {
    gJ[s] = -u * xb[s].transpose() - (v + blk.residual) * gbb[s].transpose();
  }

  const Vec2 g2 = gr.head<2>();
  const double gd = gr(2);
  const Mat23& P = blk.proj_jacobian;
  const Vec3& q = blk.warped;

  double dw = s2 * g2.dot(blk.projected - problem.correspondences.entries[blk.correspondence].target) +
              sd * gd * (q.z() - blk.target_z);
  Vec3 dq = s2 * w * P.transpose() * g2;
  dq.z() += sd * w * gd;
  Mat23 gP = Mat23::Zero();

  std::array<Mat36, SkinningTable::kSupport> dqk{};
  for (int s = 0; s < m; ++s) {
    const int i = blk.nodes[s];
    const double a = blk.alpha[s];
    const Vec3 arm = blk.source - problem.graph.nodes[i];
    const Mat3 H = hat(motion.rotations[i] * arm);
    dqk[s].leftCols<3>() = -a * H;
    dqk[s].rightCols<3>() = a * Mat3::Identity();

    const Eigen::Matrix<double, 2, 6> gJ2 = gJ[s].topRows<2>();
    const Eigen::Matrix<double, 1, 6> gJd = gJ[s].row(2);
    dw += s2 * (gJ2.cwiseProduct(P * dqk[s])).sum() + sd * gJd.dot(dqk[s].row(2));
    gP += s2 * w * gJ2 * dqk[s].transpose();

    Mat36 g_dq = s2 * w * P.transpose() * gJ2;
    g_dq.row(2) += sd * w * gJd;
    const Mat3 gH = -a * g_dq.leftCols<3>();
    const Vec3 gbvec = hat_adjoint(gH);
    gT.rotation[i] += gbvec * arm.transpose();
  }

  // Projection Jacobian depends on the warped point.
  const double iz = 1.0 / q.z();
  const double iz2 = iz * iz;
  const double iz3 = iz2 * iz;
  dq.x() += gP(0, 2) * (-cam.fx * iz2);
  dq.y() += gP(1, 2) * (-cam.fy * iz2);
  dq.z() += gP(0, 0) * (-cam.fx * iz2) + gP(0, 2) * (2.0 * cam.fx * q.x() * iz3) +
            gP(1, 1) * (-cam.fy * iz2) + gP(1, 2) * (2.0 * cam.fy * q.y() * iz3);

  for (int s = 0; s < m; ++s) {
    const int i = blk.nodes[s];
    const double a = blk.alpha[s];
    const Vec3 arm = blk.source - problem.graph.nodes[i];
    gT.rotation[i] += a * dq * arm.transpose();
    gT.translation[i] += a * dq;
  }

  const int k = blk.correspondence;
  out.weight[k] += dw;
  out.target[k] += -s2 * w * g2 - sd * w * gd * blk.target_z_grad;
}

void backward_reg(const RegBlock& e, const ResidualSystem& sys, const DeformationGraph& graph,
                  const Eigen::VectorXd& x, const Eigen::VectorXd& gb, MotionGradient& gT) {
  const int ci = sys.node_column[e.i];
  const int cj = sys.node_column[e.j];
  const double s = e.scale;
  const Vec6 xi = column_block(x, ci);
  const Vec6 xj = column_block(x, cj);
  const Vec6 gi = column_block(gb, ci);
  const Vec6 gj = column_block(gb, cj);
  const Vec3 u = e.jacobian_eps_i * gi.head<3>() + s * gi.tail<3>() - s * gj.tail<3>();
  const Vec3 v = e.jacobian_eps_i * xi.head<3>() + s * xi.tail<3>() - s * xj.tail<3>();
  const Vec3 gr = -u;
  const Mat3 gJe = -u * xi.head<3>().transpose() - (v + e.residual) * gi.head<3>().transpose();

  const Vec3 d = graph.nodes[e.j] - graph.nodes[e.i];
  gT.rotation[e.i] += s * gr * d.transpose() + hat_adjoint(-s * gJe) * d.transpose();
  gT.translation[e.i] += s * gr;
  gT.translation[e.j] -= s * gr;
}

}  // namespace

InputGradients solver_backward(const TrackingProblem& problem, const ForwardTape& tape,
                               const MotionGradient& final_gradient) {
  const std::size_t n_nodes = problem.graph.node_count();
  if (final_gradient.node_count() != n_nodes) {
    throw Error(ErrorCode::kInvalidInput, "solver_backward: gradient/graph node count mismatch");
  }
  const std::size_t n_corr = problem.correspondences.size();
  InputGradients out;
  out.target.assign(n_corr, Vec2::Zero());
  out.weight.assign(n_corr, 0.0);
  out.final_translation = final_gradient.translation;

  MotionGradient next = final_gradient;  // adjoint of T_{n+1}
  for (auto it = tape.entries.rbegin(); it != tape.entries.rend(); ++it) {
    const TapeEntry& entry = *it;
    const ResidualSystem& sys = entry.system;
    const GraphMotion& motion = entry.motion;

    // Through T_{n+1} = (exp(eps) R_n, t_n + dt).
    MotionGradient current(n_nodes);
    Eigen::VectorXd gx = Eigen::VectorXd::Zero(sys.unknowns());
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const int c = sys.node_column[i];
      current.translation[i] = next.translation[i];
      if (c < 0) {
        current.rotation[i] = next.rotation[i];
        continue;
      }
      const Vec3 eps = entry.delta.rotation[i];
      const Mat3 m = next.rotation[i] * motion.rotations[i].transpose();
      const auto dE = exp_so3_derivatives(eps);
      for (int k = 0; k < 3; ++k) gx(6 * c + k) = m.cwiseProduct(dE[k]).sum();
      gx.segment<3>(6 * c + 3) = next.translation[i];
      current.rotation[i] = exp_so3(eps).transpose() * next.rotation[i];
    }

    const LinearSolveGradient lg = linear_solve_backward(entry.lu, entry.solution, gx);
    for (const DataBlock& blk : sys.data) {
      backward_data(blk, sys, problem, motion, entry.solution, lg.db, current, out);
    }
    for (const RegBlock& e : sys.reg) {
      backward_reg(e, sys, problem.graph, entry.solution, lg.db, current);
    }
    next = std::move(current);
  }
  return out;
}

}  // namespace ntrack
