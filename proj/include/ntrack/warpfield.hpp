#pragma once

#include <array>
#include <vector>

#include "ntrack/deformgraph.hpp"
#include "ntrack/geometry.hpp"

namespace ntrack {

/// Skew-symmetric matrix with hat(w) * x == w.cross(x).
Mat3 hat(const Vec3& w);

/// Rodrigues' formula; second-order Taylor expansion below |w| = 1e-8.
Mat3 exp_so3(const Vec3& w);

/// d exp_so3(w) / d w_k for k = 0..2, consistent with both branches of
/// exp_so3.
std::array<Mat3, 3> exp_so3_derivatives(const Vec3& w);

/// Nearest rotation (polar factor) via SVD.
Mat3 orthonormalize(const Mat3& m);

/// Per-node accumulated rotation and translation. The pending axis-angle
/// delta of each node is implicitly zero between solver iterations.
struct GraphMotion {
  std::vector<Mat3> rotations;
  std::vector<Vec3> translations;
  int increments_since_orthonormalize = 0;

  GraphMotion() = default;
  explicit GraphMotion(std::size_t node_count)
      : rotations(node_count, Mat3::Identity()),
        translations(node_count, Vec3::Zero()) {}

  std::size_t node_count() const { return rotations.size(); }
  bool finite() const;
};

/// Per-node delta (rotation increment eps, translation increment dt).
struct MotionDelta {
  std::vector<Vec3> rotation;
  std::vector<Vec3> translation;

  explicit MotionDelta(std::size_t node_count = 0)
      : rotation(node_count, Vec3::Zero()), translation(node_count, Vec3::Zero()) {}
};

/// Re-orthonormalization period of apply_increment.
inline constexpr int kOrthonormalizeEvery = 10;

/// R_i <- exp(eps_i) R_i, t_i <- t_i + dt_i. Throws kDivergence on a
/// non-finite delta.
GraphMotion apply_increment(const GraphMotion& motion, const MotionDelta& delta);

/// Skinned warp of a single point with explicit support. The pending
/// rotation delta is taken as zero.
Vec3 warp_point(const Vec3& p, const DeformationGraph& graph,
                const std::array<int, SkinningTable::kSupport>& nodes,
                const std::array<double, SkinningTable::kSupport>& weights,
                const GraphMotion& motion);

/// Warp of pixel `pixel`; throws kUnsupportedPoint when the skinning table
/// has no support for it.
Vec3 warp_point(const Vec3& p, std::size_t pixel, const DeformationGraph& graph,
                const SkinningTable& skin, const GraphMotion& motion);

/// Element-wise warp of every valid and supported pixel; all others are
/// invalid in the output.
PointImage warp_cloud(const PointImage& points, const DeformationGraph& graph,
                      const SkinningTable& skin, const GraphMotion& motion);

/// Node motion equivalent to the global rigid transform x -> R x + t: every
/// node gets R and the translation induced at its own position.
GraphMotion rigid_motion(const DeformationGraph& graph, const Mat3& rotation,
                         const Vec3& translation);

}  // namespace ntrack
