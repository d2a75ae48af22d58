#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ntrack/diffsolver.hpp"
#include "ntrack/losses.hpp"
#include "ntrack/solver.hpp"

namespace ntrack {

/// Ground truth the tracking loss compares against.
struct LossTargets {
  const std::vector<Vec3>& translations;     // t~ per node
  const std::vector<std::uint8_t>& node_mask;  // M~V, empty = all
  const SceneFlow& flow;                       // S~
  const std::vector<std::uint8_t>& pixel_mask;  // M~S, empty = all
  double lambda_graph = 1.0;
  double lambda_warp = 1.0;
};

/// lambda_graph L_graph + lambda_warp L_warp at `motion`. Nodes outside
/// `active_nodes` (if given) are excluded from L_graph.
MotionLoss tracking_loss(const TrackingProblem& problem, const GraphMotion& motion,
                         const LossTargets& targets,
                         const std::vector<std::uint8_t>& active_nodes = {});

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct WeightLearningConfig {
  int steps = 200;
  double step_size = 1.0;
  double initial_logit = 1.0;
  /// Lower bound on the step normalizer, so a loss already at its minimum
  /// leaves the logits nearly unchanged.
  double gradient_floor = 1e-4;
  SolverConfig solver;
};

struct WeightLearningResult {
  std::vector<double> logits;
  std::vector<double> weights;  // sigmoid(logits); entries never used stay at the initial weight
  std::vector<double> loss_curve;  // loss before each step, then after the last
};

/// Gradient descent on per-correspondence weight logits, w = sigmoid(logit),
/// against the tracking loss differentiated through the solver. Each step
/// moves the logits by step_size * g / max(max|g|, gradient_floor), so the
/// largest component moves by step_size while the gradient is not tiny.
/// Solver failures are rethrown with the step index.
WeightLearningResult optimize_weights(const TrackingProblem& problem,
                                      const LossTargets& targets,
                                      const WeightLearningConfig& config);

struct GradcheckEntry {
  int correspondence = -1;
  int parameter = 0;  // 0: w, 1: c.x, 2: c.y
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  double loss = 0.0;
  int unknowns = 0;
  std::vector<GradcheckEntry> entries;
  double p99_weight = 0.0;
  double p99_target = 0.0;
  double max_weight = 0.0;
  double max_target = 0.0;
};

/// Relative errors are |a - n| / max(|a|, |n|, kGradcheckFloor * G) with G
/// the largest analytic magnitude among parameters of the same kind.
inline constexpr double kGradcheckFloor = 1e-6;

/// Central differences of the full solve plus tracking loss against
/// solver_backward, over the first `max_entries` valid correspondences
/// (all when empty).
GradcheckReport gradcheck(const TrackingProblem& problem, const SolverConfig& config,
                          const LossTargets& targets, double eps_w, double eps_c,
                          std::optional<std::size_t> max_entries = std::nullopt);

/// Value at fraction q of the sorted values (nearest rank, q in [0, 1]).
double percentile(std::vector<double> values, double q);

}  // namespace ntrack
