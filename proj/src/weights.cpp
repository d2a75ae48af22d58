#include "ntrack/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ntrack/error.hpp"

namespace ntrack {

MotionLoss tracking_loss(const TrackingProblem& problem, const GraphMotion& motion,
                         const LossTargets& targets,
                         const std::vector<std::uint8_t>& active_nodes) {
  std::vector<std::uint8_t> mask = targets.node_mask;
  if (!active_nodes.empty()) {
    if (mask.empty()) mask.assign(active_nodes.size(), 1);
    if (mask.size() != active_nodes.size()) {
      throw Error(ErrorCode::kInvalidInput, "tracking_loss: node mask size mismatch");
    }
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] && active_nodes[i];
  }
  MotionLoss g = loss_graph(motion, targets.translations, mask);
  MotionLoss w = loss_warp(problem.source, problem.graph, problem.skin, motion, targets.flow,
                           targets.pixel_mask);
  MotionLoss out{targets.lambda_graph * g.value + targets.lambda_warp * w.value,
                 MotionGradient(motion.node_count())};
  for (std::size_t i = 0; i < motion.node_count(); ++i) {
    out.grad.rotation[i] =
        targets.lambda_graph * g.grad.rotation[i] + targets.lambda_warp * w.grad.rotation[i];
    out.grad.translation[i] = targets.lambda_graph * g.grad.translation[i] +
                              targets.lambda_warp * w.grad.translation[i];
  }
  return out;
}

WeightLearningResult optimize_weights(const TrackingProblem& problem, const LossTargets& targets,
                                      const WeightLearningConfig& config) {
  if (config.steps < 0 || !(config.step_size > 0.0) || !std::isfinite(config.initial_logit) ||
      !(config.gradient_floor >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "optimize_weights: invalid configuration");
  }
  const std::size_t n = problem.correspondences.size();
  CorrespondenceSet current = problem.correspondences;
  WeightLearningResult out;
  out.logits.assign(n, config.initial_logit);

  auto solve = [&](int step) {
    for (std::size_t k = 0; k < n; ++k) current.entries[k].weight = sigmoid(out.logits[k]);
    const TrackingProblem p{problem.camera, problem.source, problem.target,
                            problem.graph,  problem.skin,   current};
    try {
      return gauss_newton_solve(p, config.solver);
    } catch (const Error& e) {
      throw Error(e.code(), "optimize_weights: step " + std::to_string(step) + ": " + e.what());
    }
  };

  for (int step = 0; step < config.steps; ++step) {
    const SolveResult r = solve(step);
    const TrackingProblem p{problem.camera, problem.source, problem.target,
                            problem.graph,  problem.skin,   current};
    const MotionLoss loss = tracking_loss(p, r.motion, targets, r.active_nodes);
    out.loss_curve.push_back(loss.value);
    const InputGradients g = solver_backward(p, r.tape, loss.grad);

    std::vector<double> dlogit(n, 0.0);
    double scale = config.gradient_floor;
    for (std::size_t k = 0; k < n; ++k) {
      const double w = current.entries[k].weight;
      dlogit[k] = g.weight[k] * w * (1.0 - w);
      scale = std::max(scale, std::abs(dlogit[k]));
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) break;
    for (std::size_t k = 0; k < n; ++k) out.logits[k] -= config.step_size * dlogit[k] / scale;
  }
  const SolveResult last = solve(config.steps);
  const TrackingProblem p{problem.camera, problem.source, problem.target,
                          problem.graph,  problem.skin,   current};
  out.loss_curve.push_back(tracking_loss(p, last.motion, targets, last.active_nodes).value);
  out.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.weights[k] = current.entries[k].weight;
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::llround(q * static_cast<double>(values.size() - 1)));
  return values[std::min(idx, values.size() - 1)];
}

GradcheckReport gradcheck(const TrackingProblem& problem, const SolverConfig& config,
                          const LossTargets& targets, double eps_w, double eps_c,
                          std::optional<std::size_t> max_entries) {
  if (!(eps_w > 0.0) || !(eps_c > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "gradcheck: steps must be positive");
  }
  CorrespondenceSet work = problem.correspondences;
  const TrackingProblem p{problem.camera, problem.source, problem.target,
                          problem.graph,  problem.skin,   work};
  auto loss_at = [&]() {
    const SolveResult r = gauss_newton_solve(p, config);
    return tracking_loss(p, r.motion, targets, r.active_nodes).value;
  };

  GradcheckReport report;
  const SolveResult base = gauss_newton_solve(p, config);
  const MotionLoss loss = tracking_loss(p, base.motion, targets, base.active_nodes);
  report.loss = loss.value;
  report.unknowns = base.tape.entries.empty() ? 0 : base.tape.entries.front().system.unknowns();
  const InputGradients g = solver_backward(p, base.tape, loss.grad);

  std::size_t checked = 0;
  for (std::size_t k = 0; k < work.size(); ++k) {
    if (max_entries && checked >= *max_entries) break;
    if (!work.entries[k].valid) continue;
    ++checked;
    Correspondence& e = work.entries[k];
    const Correspondence saved = e;

    e.weight = saved.weight + eps_w;
    const double wp = loss_at();
    e.weight = saved.weight - eps_w;
    const double wm = loss_at();
    e = saved;
    report.entries.push_back({static_cast<int>(k), 0, g.weight[k], (wp - wm) / (2.0 * eps_w), 0.0});

    for (int d = 0; d < 2; ++d) {
      e.target[d] = saved.target[d] + eps_c;
      const double cp = loss_at();
      e.target[d] = saved.target[d] - eps_c;
      const double cm = loss_at();
      e = saved;
      report.entries.push_back(
          {static_cast<int>(k), 1 + d, g.target[k][d], (cp - cm) / (2.0 * eps_c), 0.0});
    }
  }

  double scale_w = 0.0, scale_c = 0.0;
  for (const auto& e : report.entries) {
    double& s = e.parameter == 0 ? scale_w : scale_c;
    s = std::max(s, std::abs(e.analytic));
  }
  std::vector<double> rw, rc;
  for (auto& e : report.entries) {
    const double floor = kGradcheckFloor * (e.parameter == 0 ? scale_w : scale_c);
    const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
    e.rel_error = denom > 0.0 ? std::abs(e.analytic - e.numeric) / denom : 0.0;
    (e.parameter == 0 ? rw : rc).push_back(e.rel_error);
  }
  report.p99_weight = percentile(rw, 0.99);
  report.p99_target = percentile(rc, 0.99);
  report.max_weight = rw.empty() ? 0.0 : *std::max_element(rw.begin(), rw.end());
  report.max_target = rc.empty() ? 0.0 : *std::max_element(rc.begin(), rc.end());
  return report;
}

}  // namespace ntrack
