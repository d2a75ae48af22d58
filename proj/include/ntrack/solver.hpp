#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "ntrack/energy.hpp"
#include "ntrack/warpfield.hpp"

namespace ntrack {

struct SolverConfig {
  int max_iter = 3;
  EnergyWeights weights;
  /// Clusters supporting fewer correspondences are deactivated.
  int min_cluster_correspondences = 2000;
  /// Diagonal boost added to J^T J.
  double damping = 0.0;
  /// Random subset size drawn from the valid correspondences.
  std::optional<std::size_t> correspondence_subsample;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClusterFilter {
  std::vector<std::uint8_t> active_nodes;         // per node
  std::vector<std::uint8_t> correspondence_mask;  // per correspondence
  std::vector<int> dropped_clusters;
  std::vector<int> cluster_counts;  // supported correspondences per cluster
};

/// Deactivates clusters supporting fewer than min_count correspondences,
/// repeating until stable since masking can lower other clusters' counts.
/// A correspondence counts once toward every cluster among its supporting
/// nodes. `mask` pre-masks entries (empty = none). Throws kUnderdetermined
/// when no cluster survives.
ClusterFilter filter_clusters(const TrackingProblem& problem, int min_count,
                              const std::vector<std::uint8_t>& mask = {});

/// One unrolled Gauss-Newton iteration as recorded for the backward pass.
struct TapeEntry {
  GraphMotion motion;      // state the system was assembled at
  ResidualSystem system;   // J_n, r_n
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;  // factors of A_n
  Eigen::VectorXd solution;                 // x_n = delta T_n
  MotionDelta delta;                        // x_n scattered per node
};

struct ForwardTape {
  std::vector<TapeEntry> entries;
  AssembleOptions assemble_options;
  double damping = 0.0;
};

struct SolveResult {
  GraphMotion motion;
  std::vector<double> residual_norms;  // |r_n| at the start of each iteration
  double final_residual_norm = 0.0;    // |r| at the returned motion (NaN if unusable)
  std::vector<MotionDelta> increments;
  std::size_t usable_correspondences = 0;  // in the last iteration
  std::vector<int> dropped_clusters;
  std::vector<std::uint8_t> active_nodes;
  std::vector<std::uint8_t> correspondence_mask;
  ForwardTape tape;
};

/// Seeded subset of `count` valid correspondences as a mask.
std::vector<std::uint8_t> subsample_correspondences(const CorrespondenceSet& set,
                                                    std::size_t count, std::uint64_t seed);

/// Fixed-iteration Gauss-Newton from the identity motion, solving
/// J^T J dx = -J^T r with partial-pivot LU. Throws kSingularSystem (naming
/// the cluster) or kDivergence.
SolveResult gauss_newton_solve(const TrackingProblem& problem, const SolverConfig& config);

struct Metrics {
  double epe3d = 0.0;
  double graph_error3d = 0.0;
  std::size_t pixels = 0;
  std::size_t nodes = 0;
};

/// EPE 3D over valid, supported pixels with ground-truth flow; Graph Error 3D
/// over nodes that are active (empty = all) and have ground truth (empty
/// node_mask = all).
Metrics evaluate_metrics(const PointImage& source, const DeformationGraph& graph,
                         const SkinningTable& skin, const GraphMotion& motion,
                         const SceneFlow& flow, const std::vector<Vec3>& gt_translations,
                         const std::vector<std::uint8_t>& node_mask = {},
                         const std::vector<std::uint8_t>& active_nodes = {});

/// Relative condition threshold below which A_n counts as singular.
inline constexpr double kSingularRcond = 1e-13;

}  // namespace ntrack
