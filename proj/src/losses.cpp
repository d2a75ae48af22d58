#include "ntrack/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ntrack/error.hpp"

namespace ntrack {

namespace {

constexpr double kWeightClamp = 1e-12;

double sign0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

bool unmasked(const std::vector<std::uint8_t>& mask, std::size_t i) {
  return mask.empty() || mask[i] != 0;
}

}  // namespace

CorrLoss loss_corr(const std::vector<Vec2>& predicted, const std::vector<Vec2>& truth,
                   const std::vector<std::uint8_t>& mask, double q, double eps) {
  if (predicted.size() != truth.size() || (!mask.empty() && mask.size() != truth.size())) {
    throw Error(ErrorCode::kInvalidInput, "loss_corr: shape mismatch");
  }
  if (!(eps > 0) || !(q > 0)) throw Error(ErrorCode::kInvalidInput, "loss_corr: q, eps must be > 0");
  CorrLoss out;
  out.grad.assign(predicted.size(), Vec2::Zero());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!unmasked(mask, i)) continue;
    const Vec2 d = predicted[i] - truth[i];
    const double base = std::abs(d.x()) + std::abs(d.y()) + eps;
    out.value += std::pow(base, q);
    const double s = q * std::pow(base, q - 1.0);
    out.grad[i] = {s * sign0(d.x()), s * sign0(d.y())};
  }
  return out;
}

CorrLoss loss_corr_two_level(int width, int height, const std::vector<Vec2>& predicted,
                             const std::vector<Vec2>& truth,
                             const std::vector<std::uint8_t>& mask, double q, double eps) {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (width <= 0 || height <= 0 || predicted.size() != n) {
    throw Error(ErrorCode::kInvalidInput, "loss_corr_two_level: shape mismatch");
  }
  CorrLoss out = loss_corr(predicted, truth, mask, q, eps);

  const int hw = width / 2;
  const int hh = height / 2;
  std::vector<Vec2> cp, ct;
  std::vector<std::uint8_t> cm;
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      Vec2 sp = Vec2::Zero(), st = Vec2::Zero();
      bool ok = true;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const std::size_t i = static_cast<std::size_t>(2 * y + dy) * width + (2 * x + dx);
          sp += predicted[i];
          st += truth[i];
          ok = ok && unmasked(mask, i);
        }
      }
      cp.push_back(0.125 * sp);  // mean, then halved coordinates
      ct.push_back(0.125 * st);
      cm.push_back(ok ? 1 : 0);
    }
  }
  const CorrLoss coarse = loss_corr(cp, ct, cm, q, eps);
  out.value += coarse.value;
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const Vec2 g = 0.125 * coarse.grad[static_cast<std::size_t>(y) * hw + x];
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          out.grad[static_cast<std::size_t>(2 * y + dy) * width + (2 * x + dx)] += g;
        }
      }
    }
  }
  return out;
}

MotionLoss loss_graph(const GraphMotion& motion, const std::vector<Vec3>& truth,
                      const std::vector<std::uint8_t>& node_mask) {
  const std::size_t n = motion.node_count();
  if (truth.size() != n || (!node_mask.empty() && node_mask.size() != n)) {
    throw Error(ErrorCode::kInvalidInput, "loss_graph: node count mismatch");
  }
  MotionLoss out{0.0, MotionGradient(n)};
  for (std::size_t i = 0; i < n; ++i) {
    if (!unmasked(node_mask, i)) continue;
    const Vec3 d = motion.translations[i] - truth[i];
    out.value += d.squaredNorm();
    out.grad.translation[i] = 2.0 * d;
  }
  return out;
}

MotionLoss loss_warp(const PointImage& source, const DeformationGraph& graph,
                     const SkinningTable& skin, const GraphMotion& motion,
                     const SceneFlow& flow, const std::vector<std::uint8_t>& pixel_mask) {
  if (skin.size() != source.size() || flow.flow.size() != source.size() ||
      (!pixel_mask.empty() && pixel_mask.size() != source.size()) ||
      motion.node_count() != graph.node_count()) {
    throw Error(ErrorCode::kInvalidInput, "loss_warp: shape mismatch");
  }
  MotionLoss out{0.0, MotionGradient(graph.node_count())};
  for (std::size_t px = 0; px < source.size(); ++px) {
    if (!unmasked(pixel_mask, px) || !source.valid(px) || !skin.supported(px) || !flow.valid[px]) {
      continue;
    }
    const Vec3& p = source.point(px);
    const auto& nodes = skin.nodes(px);
    const auto& alpha = skin.weights(px);
    const Vec3 e = warp_point(p, graph, nodes, alpha, motion) - (p + flow.flow[px]);
    out.value += e.squaredNorm();
    const Vec3 dq = 2.0 * e;
    for (int s = 0; s < SkinningTable::kSupport && nodes[s] >= 0; ++s) {
      const int i = nodes[s];
      out.grad.rotation[i] += alpha[s] * dq * (p - graph.nodes[i]).transpose();
      out.grad.translation[i] += alpha[s] * dq;
    }
  }
  return out;
}

WeightLoss loss_weight_supervised(const std::vector<double>& weights,
                                  const std::vector<Vec2>& predicted,
                                  const std::vector<Vec2>& truth, const PointImage& target) {
  if (weights.size() != predicted.size() || truth.size() != predicted.size()) {
    throw Error(ErrorCode::kInvalidInput, "loss_weight_supervised: shape mismatch");
  }
  WeightLoss out;
  out.grad.assign(weights.size(), 0.0);
  out.labels.assign(weights.size(), -1);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] > 0.0 && weights[k] <= 1.0)) {
      throw Error(ErrorCode::kInvalidInput, "loss_weight_supervised: weight outside (0,1]");
    }
    const double w = std::clamp(weights[k], kWeightClamp, 1.0 - kWeightClamp);
    const PointSample a = bilinear_sample(target, predicted[k]);
    const PointSample b = bilinear_sample(target, truth[k]);
    if (!a.valid || !b.valid) continue;
    const double err = (a.point - b.point).norm();
    if (err <= kSupervisedInlierDistance) {
      out.labels[k] = 1;
      out.value += -std::log(w);
      out.grad[k] = -1.0 / w;
    } else if (err >= kSupervisedOutlierDistance) {
      out.labels[k] = 0;
      out.value += -std::log(1.0 - w);
      out.grad[k] = 1.0 / (1.0 - w);
    }
  }
  return out;
}

}  // namespace ntrack
