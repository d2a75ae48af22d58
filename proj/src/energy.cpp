#include "ntrack/energy.hpp"

#include <cmath>
#include <string>

#include "ntrack/error.hpp"

namespace ntrack {

std::size_t CorrespondenceSet::valid_count() const {
  std::size_t n = 0;
  for (const auto& c : entries) n += c.valid ? 1 : 0;
  return n;
}

std::optional<Vec2> residual_2d(const Vec3& source_point, const Vec2& target_loc,
                                double weight, const DeformationGraph& graph,
                                const std::array<int, SkinningTable::kSupport>& nodes,
                                const std::array<double, SkinningTable::kSupport>& alpha,
                                const GraphMotion& motion, const CameraIntrinsics& camera) {
  const Vec3 q = warp_point(source_point, graph, nodes, alpha, motion);
  if (!(q.z() > 0.0)) return std::nullopt;
  return Vec2(weight * (project(q, camera) - target_loc));
}

std::optional<double> residual_depth(const Vec3& source_point, const Vec2& target_loc,
                                     double weight, const DeformationGraph& graph,
                                     const std::array<int, SkinningTable::kSupport>& nodes,
                                     const std::array<double, SkinningTable::kSupport>& alpha,
                                     const GraphMotion& motion, const PointImage& target) {
  const PointSample s = bilinear_sample(target, target_loc);
  if (!s.valid) return std::nullopt;
  const Vec3 q = warp_point(source_point, graph, nodes, alpha, motion);
  return weight * (q.z() - s.point.z());
}

Vec3 residual_reg(int i, int j, const DeformationGraph& graph, const GraphMotion& motion) {
  const Vec3& vi = graph.nodes[i];
  const Vec3& vj = graph.nodes[j];
  return motion.rotations[i] * (vj - vi) + vi + motion.translations[i] -
         (vj + motion.translations[j]);
}

Eigen::VectorXd ResidualSystem::residual_vector() const {
  const std::size_t nd = data.size();
  Eigen::VectorXd r(static_cast<Eigen::Index>(rows()));
  for (std::size_t k = 0; k < nd; ++k) {
    r(2 * k) = data[k].residual(0);
    r(2 * k + 1) = data[k].residual(1);
    r(2 * nd + k) = data[k].residual(2);
  }
  for (std::size_t e = 0; e < reg.size(); ++e) {
    r.segment<3>(3 * nd + 3 * e) = reg[e].residual;
  }
  return r;
}

Eigen::MatrixXd ResidualSystem::dense_jacobian() const {
  const std::size_t nd = data.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()), unknowns());
  for (std::size_t k = 0; k < nd; ++k) {
    const DataBlock& b = data[k];
    for (int s = 0; s < b.support; ++s) {
      const int col = 6 * node_column[b.nodes[s]];
      J.block<1, 6>(2 * k, col) = b.jacobian[s].row(0);
      J.block<1, 6>(2 * k + 1, col) = b.jacobian[s].row(1);
      J.block<1, 6>(2 * nd + k, col) = b.jacobian[s].row(2);
    }
  }
  for (std::size_t e = 0; e < reg.size(); ++e) {
    const RegBlock& b = reg[e];
    const auto row = static_cast<Eigen::Index>(3 * nd + 3 * e);
    const int ci = 6 * node_column[b.i];
    const int cj = 6 * node_column[b.j];
    J.block<3, 3>(row, ci) = b.jacobian_eps_i;
    J.block<3, 3>(row, ci + 3) += b.scale * Mat3::Identity();
    J.block<3, 3>(row, cj + 3) -= b.scale * Mat3::Identity();
  }
  return J;
}

double ResidualSystem::data_squared_norm() const {
  double s = 0.0;
  for (const auto& b : data) s += b.residual.squaredNorm();
  return s;
}

double ResidualSystem::squared_norm() const {
  double s = data_squared_norm();
  for (const auto& b : reg) s += b.residual.squaredNorm();
  return s;
}

ResidualSystem::RowSource ResidualSystem::row_source(std::size_t row) const {
  const std::size_t nd = data.size();
  if (row < 2 * nd) {
    return {row % 2 == 0 ? RowKind::k2dX : RowKind::k2dY, static_cast<int>(row / 2),
            static_cast<int>(row % 2)};
  }
  if (row < 3 * nd) return {RowKind::kDepth, static_cast<int>(row - 2 * nd), 2};
  const std::size_t r = row - 3 * nd;
  if (r >= 3 * reg.size()) throw Error(ErrorCode::kInvalidInput, "row_source: row out of range");
  return {RowKind::kReg, static_cast<int>(r / 3), static_cast<int>(r % 3)};
}

void ResidualSystem::normal_equations(Eigen::MatrixXd& A, Eigen::VectorXd& b,
                                      double damping) const {
  const int n = unknowns();
  A = Eigen::MatrixXd::Zero(n, n);
  b = Eigen::VectorXd::Zero(n);
  for (const DataBlock& blk : data) {
    for (int s = 0; s < blk.support; ++s) {
      const int cs = 6 * node_column[blk.nodes[s]];
      b.segment<6>(cs) -= blk.jacobian[s].transpose() * blk.residual;
      for (int t = 0; t < blk.support; ++t) {
        const int ct = 6 * node_column[blk.nodes[t]];
        A.block<6, 6>(cs, ct) += blk.jacobian[s].transpose() * blk.jacobian[t];
      }
    }
  }
  for (const RegBlock& e : reg) {
    const int ci = 6 * node_column[e.i];
    const int cj = 6 * node_column[e.j];
    const double s = e.scale;
    const double s2 = s * s;
    const Mat3& Je = e.jacobian_eps_i;
    // J_i = [Je, sI], J_j = [0, -sI].
    A.block<3, 3>(ci, ci) += Je.transpose() * Je;
    A.block<3, 3>(ci, ci + 3) += s * Je.transpose();
    A.block<3, 3>(ci + 3, ci) += s * Je;
    A.block<3, 3>(ci + 3, ci + 3) += s2 * Mat3::Identity();
    A.block<3, 3>(ci, cj + 3) -= s * Je.transpose();
    A.block<3, 3>(cj + 3, ci) -= s * Je;
    A.block<3, 3>(ci + 3, cj + 3) -= s2 * Mat3::Identity();
    A.block<3, 3>(cj + 3, ci + 3) -= s2 * Mat3::Identity();
    A.block<3, 3>(cj + 3, cj + 3) += s2 * Mat3::Identity();
    b.segment<3>(ci) -= Je.transpose() * e.residual;
    b.segment<3>(ci + 3) -= s * e.residual;
    b.segment<3>(cj + 3) += s * e.residual;
  }
  if (damping != 0.0) A.diagonal().array() += damping;
}

ResidualSystem assemble(const TrackingProblem& problem, const GraphMotion& motion,
                        const AssembleOptions& options) {
  const DeformationGraph& graph = problem.graph;
  const std::size_t n = graph.node_count();
  if (motion.node_count() != n) {
    throw Error(ErrorCode::kInvalidInput, "assemble: motion/graph node count mismatch");
  }
  if (!options.active.empty() && options.active.size() != n) {
    throw Error(ErrorCode::kInvalidInput, "assemble: active mask size mismatch");
  }
  const auto& corrs = problem.correspondences.entries;
  if (!options.correspondence_mask.empty() && options.correspondence_mask.size() != corrs.size()) {
    throw Error(ErrorCode::kInvalidInput, "assemble: correspondence mask size mismatch");
  }
  const EnergyWeights& lw = options.weights;
  if (lw.lambda_2d < 0 || lw.lambda_depth < 0 || lw.lambda_reg < 0) {
    throw Error(ErrorCode::kInvalidInput, "assemble: negative term weight");
  }

  ResidualSystem sys;
  sys.node_column.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (options.active.empty() || options.active[i]) sys.node_column[i] = sys.active_nodes++;
  }
  sys.sqrt_lambda_2d = std::sqrt(lw.lambda_2d);
  sys.sqrt_lambda_depth = std::sqrt(lw.lambda_depth);
  const double s2d = sys.sqrt_lambda_2d;
  const double sdep = sys.sqrt_lambda_depth;

  const PointImage& src = problem.source;
  const SkinningTable& skin = problem.skin;
  for (std::size_t k = 0; k < corrs.size(); ++k) {
    const Correspondence& c = corrs[k];
    if (!c.valid) continue;
    if (!options.correspondence_mask.empty() && !options.correspondence_mask[k]) continue;
    if (c.ux < 0 || c.uy < 0 || c.ux >= src.width() || c.uy >= src.height()) continue;
    const std::size_t px = src.index(c.ux, c.uy);
    if (!src.valid(px) || px >= skin.size() || !skin.supported(px)) continue;

    DataBlock blk;
    blk.correspondence = static_cast<int>(k);
    bool all_active = true;
    for (int s = 0; s < SkinningTable::kSupport; ++s) {
      const int i = skin.nodes(px)[s];
      if (i < 0) break;
      if (sys.node_column[i] < 0) all_active = false;
      blk.nodes[blk.support] = i;
      blk.alpha[blk.support] = skin.weights(px)[s];
      ++blk.support;
    }
    if (!all_active || blk.support == 0) continue;
    for (int s = blk.support; s < SkinningTable::kSupport; ++s) blk.nodes[s] = -1;

    blk.source = src.point(px);
    blk.weight = c.weight;
    blk.warped = warp_point(blk.source, graph, blk.nodes, blk.alpha, motion);
    if (!(blk.warped.z() > 0.0)) {
      sys.dropped.push_back({static_cast<int>(k), DropReason::kBehindCamera});
      continue;
    }
    const PointSampleGrad ts = bilinear_sample_grad(problem.target, c.target);
    if (!ts.valid) {
      sys.dropped.push_back({static_cast<int>(k), DropReason::kTargetInvalid});
      continue;
    }
    blk.target_z = ts.point.z();
    blk.target_z_grad = ts.dloc.row(2).transpose();
    blk.proj_jacobian = project_jacobian(blk.warped, problem.camera);
    blk.projected = project(blk.warped, problem.camera);
    const double w = c.weight;
    blk.residual.head<2>() = s2d * w * (blk.projected - c.target);
    blk.residual(2) = sdep * w * (blk.warped.z() - blk.target_z);

    for (int s = 0; s < blk.support; ++s) {
      const int i = blk.nodes[s];
      const double a = blk.alpha[s];
      const Mat3 H = hat(motion.rotations[i] * (blk.source - graph.nodes[i]));
      Mat36 dq;
      dq.leftCols<3>() = -a * H;
      dq.rightCols<3>() = a * Mat3::Identity();
      blk.jacobian[s].topRows<2>() = (s2d * w) * blk.proj_jacobian * dq;
      blk.jacobian[s].row(2) = (sdep * w) * dq.row(2);
    }
    sys.data.push_back(blk);
  }
  if (options.require_data && sys.data.empty()) {
    throw Error(ErrorCode::kUnderdetermined, "assemble: no usable correspondences");
  }

  const double sreg = std::sqrt(lw.lambda_reg);
  double mean_len = 0.0;
  std::size_t edge_total = 0;
  if (lw.reweight_edges_by_length) {
    for (std::size_t i = 0; i < n; ++i) {
      for (int j : graph.edges[i]) {
        mean_len += (graph.nodes[j] - graph.nodes[i]).norm();
        ++edge_total;
      }
    }
    if (edge_total > 0) mean_len /= static_cast<double>(edge_total);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (sys.node_column[i] < 0) continue;
    for (int j : graph.edges[i]) {
      if (sys.node_column[j] < 0) continue;
      RegBlock e;
      e.i = static_cast<int>(i);
      e.j = j;
      e.scale = sreg;
      if (lw.reweight_edges_by_length) {
        const double len = (graph.nodes[j] - graph.nodes[i]).norm();
        if (len > 0.0) e.scale *= mean_len / len;
      }
      e.residual = e.scale * residual_reg(e.i, e.j, graph, motion);
      e.jacobian_eps_i =
          -e.scale * hat(motion.rotations[i] * (graph.nodes[j] - graph.nodes[i]));
      sys.reg.push_back(e);
    }
  }
  if (sys.rows() == 0) {
    throw Error(ErrorCode::kUnderdetermined, "assemble: no residual rows");
  }
  return sys;
}

}  // namespace ntrack
