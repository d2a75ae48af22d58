#include "ntrack/warpfield.hpp"

#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "ntrack/error.hpp"

namespace ntrack {

namespace {
constexpr double kTaylorAngle = 1e-8;
constexpr double kSeriesAngle = 1e-4;
}  // namespace

Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

Mat3 exp_so3(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 W = hat(w);
  if (theta < kTaylorAngle) return Mat3::Identity() + W + 0.5 * W * W;
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * W + b * W * W;
}

std::array<Mat3, 3> exp_so3_derivatives(const Vec3& w) {
  // R = I + a(t) W + b(t) W^2 with t = |w|; c1 = a'(t)/t, c2 = b'(t)/t.
  const double theta = w.norm();
  const double t2 = theta * theta;
  double a, b, c1, c2;
  if (theta < kTaylorAngle) {
    a = 1.0;
    b = 0.5;
    c1 = 0.0;
    c2 = 0.0;
  } else if (theta < kSeriesAngle) {
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
    c1 = -1.0 / 3.0 + t2 / 30.0;
    c2 = -1.0 / 12.0 + t2 / 180.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    a = s / theta;
    b = (1.0 - c) / t2;
    c1 = (theta * c - s) / (t2 * theta);
    c2 = (theta * s - 2.0 * (1.0 - c)) / (t2 * t2);
  }
  const Mat3 W = hat(w);
  const Mat3 W2 = W * W;
  std::array<Mat3, 3> d;
  for (int k = 0; k < 3; ++k) {
    const Mat3 E = hat(Vec3::Unit(k));
    d[k] = a * E + b * (E * W + W * E) + (c1 * w[k]) * W + (c2 * w[k]) * W2;
  }
  return d;
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

bool GraphMotion::finite() const {
  for (const auto& r : rotations) {
    if (!r.allFinite()) return false;
  }
  for (const auto& t : translations) {
    if (!t.allFinite()) return false;
  }
  return true;
}

GraphMotion apply_increment(const GraphMotion& motion, const MotionDelta& delta) {
  const std::size_t n = motion.node_count();
  if (delta.rotation.size() != n || delta.translation.size() != n) {
    throw Error(ErrorCode::kInvalidInput, "apply_increment: node count mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!delta.rotation[i].allFinite() || !delta.translation[i].allFinite()) {
      throw Error(ErrorCode::kDivergence,
                  "apply_increment: non-finite increment at node " + std::to_string(i));
    }
  }
  GraphMotion out = motion;
  for (std::size_t i = 0; i < n; ++i) {
    out.rotations[i] = exp_so3(delta.rotation[i]) * motion.rotations[i];
    out.translations[i] = motion.translations[i] + delta.translation[i];
  }
  if (++out.increments_since_orthonormalize >= kOrthonormalizeEvery) {
    for (auto& r : out.rotations) r = orthonormalize(r);
    out.increments_since_orthonormalize = 0;
  }
  return out;
}

Vec3 warp_point(const Vec3& p, const DeformationGraph& graph,
                const std::array<int, SkinningTable::kSupport>& nodes,
                const std::array<double, SkinningTable::kSupport>& weights,
                const GraphMotion& motion) {
  Vec3 q = Vec3::Zero();
  bool any = false;
  for (int k = 0; k < SkinningTable::kSupport; ++k) {
    const int i = nodes[k];
    if (i < 0) continue;
    any = true;
    const Vec3& v = graph.nodes[i];
    q += weights[k] * (motion.rotations[i] * (p - v) + v + motion.translations[i]);
  }
  if (!any) throw Error(ErrorCode::kUnsupportedPoint, "warp_point: point has no supporting node");
  return q;
}

Vec3 warp_point(const Vec3& p, std::size_t pixel, const DeformationGraph& graph,
                const SkinningTable& skin, const GraphMotion& motion) {
  if (pixel >= skin.size() || !skin.supported(pixel)) {
    throw Error(ErrorCode::kUnsupportedPoint,
                "warp_point: pixel " + std::to_string(pixel) + " is unsupported");
  }
  return warp_point(p, graph, skin.nodes(pixel), skin.weights(pixel), motion);
}

PointImage warp_cloud(const PointImage& points, const DeformationGraph& graph,
                      const SkinningTable& skin, const GraphMotion& motion) {
  PointImage out(points.width(), points.height());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points.valid(i) || i >= skin.size() || !skin.supported(i)) continue;
    out.set(i, warp_point(points.point(i), graph, skin.nodes(i), skin.weights(i), motion));
  }
  return out;
}

GraphMotion rigid_motion(const DeformationGraph& graph, const Mat3& rotation,
                         const Vec3& translation) {
  GraphMotion m(graph.node_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const Vec3& v = graph.nodes[i];
    m.rotations[i] = rotation;
    m.translations[i] = rotation * v + translation - v;
  }
  return m;
}

}  // namespace ntrack
