#pragma once

#include <cstdint>
#include <vector>

#include "ntrack/diffsolver.hpp"
#include "ntrack/energy.hpp"

namespace ntrack {

inline constexpr double kCorrLossQ = 0.4;
inline constexpr double kCorrLossEps = 0.01;

struct CorrLoss {
  double value = 0.0;
  std::vector<Vec2> grad;  // dL/dC per entry
};

/// Sum over unmasked entries of (|dx| + |dy| + eps)^q. The subgradient of
/// |.| at zero is taken as zero. Empty mask = all entries.
CorrLoss loss_corr(const std::vector<Vec2>& predicted, const std::vector<Vec2>& truth,
                   const std::vector<std::uint8_t>& mask, double q = kCorrLossQ,
                   double eps = kCorrLossEps);

/// Two-level version over dense width x height flow fields: the full
/// resolution term plus a half resolution term built from 2x2 block means
/// with coordinates halved. A block is masked if any of its pixels is.
CorrLoss loss_corr_two_level(int width, int height, const std::vector<Vec2>& predicted,
                             const std::vector<Vec2>& truth,
                             const std::vector<std::uint8_t>& mask, double q = kCorrLossQ,
                             double eps = kCorrLossEps);

struct MotionLoss {
  double value = 0.0;
  MotionGradient grad;
};

/// Sum over unmasked nodes of |t_i - t~_i|^2. Empty mask = all nodes.
MotionLoss loss_graph(const GraphMotion& motion, const std::vector<Vec3>& truth,
                      const std::vector<std::uint8_t>& node_mask);

/// Sum over unmasked, valid and supported pixels with valid flow of
/// |Q(p) - (p + s~)|^2.
MotionLoss loss_warp(const PointImage& source, const DeformationGraph& graph,
                     const SkinningTable& skin, const GraphMotion& motion,
                     const SceneFlow& flow, const std::vector<std::uint8_t>& pixel_mask);

inline constexpr double kSupervisedInlierDistance = 0.1;
inline constexpr double kSupervisedOutlierDistance = 0.3;

struct WeightLoss {
  double value = 0.0;
  std::vector<double> grad;   // dL/dw per entry
  std::vector<std::int8_t> labels;  // 1 inlier, 0 outlier, -1 ignored
};

/// Binary cross-entropy of the weights against labels from the 3D distance
/// between the target points sampled at the predicted and true locations:
/// 1 when within 0.1 m, 0 when 0.3 m or more away, ignored in between or
/// where either sample is invalid.
WeightLoss loss_weight_supervised(const std::vector<double>& weights,
                                  const std::vector<Vec2>& predicted,
                                  const std::vector<Vec2>& truth, const PointImage& target);

}  // namespace ntrack
