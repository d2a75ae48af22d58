#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ntrack/deformgraph.hpp"
#include "ntrack/geometry.hpp"
#include "ntrack/warpfield.hpp"

namespace ntrack {

struct Correspondence {
  int ux = 0;  // source pixel
  int uy = 0;
  Vec2 target = Vec2::Zero();  // c_u, continuous target-image location
  double weight = 1.0;         // importance weight in (0, 1]
  bool valid = true;
};

struct CorrespondenceSet {
  std::vector<Correspondence> entries;

  std::size_t size() const { return entries.size(); }
  std::size_t valid_count() const;
};

/// Everything a tracking solve reads. Holds references only.
struct TrackingProblem {
  const CameraIntrinsics& camera;
  const PointImage& source;
  const PointImage& target;
  const DeformationGraph& graph;
  const SkinningTable& skin;
  const CorrespondenceSet& correspondences;
};

struct EnergyWeights {
  double lambda_2d = 0.001;
  double lambda_depth = 1.0;
  double lambda_reg = 1.0;
  /// Scales each ARAP edge by mean edge length / edge length.
  bool reweight_edges_by_length = false;
};

using Mat36 = Eigen::Matrix<double, 3, 6>;

/// Three residual rows (2D x, 2D y, depth) of one usable correspondence,
/// already scaled by sqrt(lambda) and with per-node Jacobian blocks over
/// (eps, t). Intermediate quantities are kept for the backward pass.
struct DataBlock {
  int correspondence = -1;
  int support = 0;
  std::array<int, SkinningTable::kSupport> nodes{};
  std::array<double, SkinningTable::kSupport> alpha{};
  Eigen::Vector3d residual = Eigen::Vector3d::Zero();
  std::array<Mat36, SkinningTable::kSupport> jacobian{};

  Vec3 source = Vec3::Zero();
  Vec3 warped = Vec3::Zero();
  Vec2 projected = Vec2::Zero();
  Mat23 proj_jacobian = Mat23::Zero();
  double target_z = 0.0;
  Eigen::Vector2d target_z_grad = Eigen::Vector2d::Zero();
  double weight = 0.0;
};

/// Three ARAP rows of directed edge (i, j). d r / d t_i = scale I,
/// d r / d t_j = -scale I, d r / d eps_j = 0.
struct RegBlock {
  int i = -1;
  int j = -1;
  double scale = 0.0;
  Vec3 residual = Vec3::Zero();
  Mat3 jacobian_eps_i = Mat3::Zero();
};

enum class DropReason : std::uint8_t { kBehindCamera, kTargetInvalid };

struct DroppedCorrespondence {
  int correspondence;
  DropReason reason;
};

/// Block-sparse residual vector and Jacobian. Dense row order is
/// [all 2D rows (2 per block); all depth rows; all reg rows (3 per edge)],
/// columns are 6 per active node ordered (eps, t).
struct ResidualSystem {
  std::vector<DataBlock> data;
  std::vector<RegBlock> reg;
  std::vector<int> node_column;  // column block per node, -1 if inactive
  int active_nodes = 0;
  std::vector<DroppedCorrespondence> dropped;
  double sqrt_lambda_2d = 0.0;
  double sqrt_lambda_depth = 0.0;

  int unknowns() const { return 6 * active_nodes; }
  std::size_t rows() const { return 3 * data.size() + 3 * reg.size(); }

  Eigen::VectorXd residual_vector() const;
  Eigen::MatrixXd dense_jacobian() const;
  double squared_norm() const;
  double data_squared_norm() const;

  enum class RowKind : std::uint8_t { k2dX, k2dY, kDepth, kReg };
  struct RowSource {
    RowKind kind;
    int block;      // index into data or reg
    int component;  // 0..2 within the reg residual
  };
  RowSource row_source(std::size_t row) const;

  /// A = J^T J + damping I and b = -J^T r from the blocks.
  void normal_equations(Eigen::MatrixXd& A, Eigen::VectorXd& b, double damping) const;
};

/// w (project(Q(p)) - c). Empty when the warped point is behind the camera.
std::optional<Vec2> residual_2d(const Vec3& source_point, const Vec2& target_loc,
                                double weight, const DeformationGraph& graph,
                                const std::array<int, SkinningTable::kSupport>& nodes,
                                const std::array<double, SkinningTable::kSupport>& alpha,
                                const GraphMotion& motion, const CameraIntrinsics& camera);

/// w ([Q(p)]_z - [P_t(c)]_z). Empty when the bilinear target sample is
/// invalid.
std::optional<double> residual_depth(const Vec3& source_point, const Vec2& target_loc,
                                     double weight, const DeformationGraph& graph,
                                     const std::array<int, SkinningTable::kSupport>& nodes,
                                     const std::array<double, SkinningTable::kSupport>& alpha,
                                     const GraphMotion& motion, const PointImage& target);

/// R_i (v_j - v_i) + v_i + t_i - (v_j + t_j).
Vec3 residual_reg(int i, int j, const DeformationGraph& graph, const GraphMotion& motion);

struct AssembleOptions {
  EnergyWeights weights;
  /// Nodes with active[i] == false get no unknowns; correspondences touching
  /// them are skipped. Empty means all nodes active.
  std::vector<std::uint8_t> active;
  /// Correspondences with mask[k] == 0 are skipped. Empty means none masked.
  std::vector<std::uint8_t> correspondence_mask;
  /// Throw kUnderdetermined when no correspondence is usable.
  bool require_data = true;
};

/// Residuals and analytic Jacobian at `motion` (pending deltas zero).
ResidualSystem assemble(const TrackingProblem& problem, const GraphMotion& motion,
                        const AssembleOptions& options);

}  // namespace ntrack
