#include "ntrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ntrack/error.hpp"

namespace ntrack {

void KeyframePolicy::validate() const {
  if (keyframe_interval <= 0) {
    throw Error(ErrorCode::kInvalidInput, "KeyframePolicy: keyframe_interval must be positive");
  }
  if (!(weight_threshold > 0.0) || !(bidir_threshold > 0.0) || !(multikf_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "KeyframePolicy: thresholds must be positive");
  }
  if (!(min_valid_fraction > 0.0) || min_valid_fraction > 1.0) {
    throw Error(ErrorCode::kInvalidInput, "KeyframePolicy: min_valid_fraction must lie in (0, 1]");
  }
  if (soft_bidirectional && !(soft_tau > 0.0 && std::isfinite(soft_tau))) {
    throw Error(ErrorCode::kInvalidInput, "KeyframePolicy: soft_tau must be positive");
  }
}

std::size_t threshold_filter(CorrespondenceSet& set, double delta) {
  std::size_t rejected = 0;
  for (auto& e : set.entries) {
    if (e.valid && e.weight < delta) {
      e.valid = false;
      ++rejected;
    }
  }
  return rejected;
}

std::size_t bidirectional_filter(CorrespondenceSet& forward, const CorrespondenceSet& backward,
                                 const PointImage& keyframe_points, int frame_width,
                                 int frame_height, double threshold, bool soft, double tau) {
  const auto W = static_cast<std::size_t>(std::max(frame_width, 0));
  const auto H = static_cast<std::size_t>(std::max(frame_height, 0));
  std::vector<Vec2> back(W * H, Vec2::Zero());
  std::vector<std::uint8_t> has(W * H, 0);
  for (const auto& b : backward.entries) {
    if (!b.valid || b.ux < 0 || b.uy < 0 || b.ux >= frame_width || b.uy >= frame_height) continue;
    const std::size_t i = static_cast<std::size_t>(b.uy) * W + static_cast<std::size_t>(b.ux);
    back[i] = b.target;
    has[i] = 1;
  }

  // Round trip u -> c_u -> u'; empty when any lookup fails.
  auto round_trip = [&](const Correspondence& e) -> std::optional<double> {
    if (e.ux < 0 || e.uy < 0 || e.ux >= keyframe_points.width() ||
        e.uy >= keyframe_points.height() || !keyframe_points.valid(e.ux, e.uy)) {
      return std::nullopt;
    }
    const Vec2 c = e.target;
    if (!c.allFinite() || c.x() < 0.0 || c.y() < 0.0 || c.x() > frame_width - 1.0 ||
        c.y() > frame_height - 1.0) {
      return std::nullopt;
    }
    const int x0 = std::min(static_cast<int>(std::floor(c.x())), frame_width - 1);
    const int y0 = std::min(static_cast<int>(std::floor(c.y())), frame_height - 1);
    const int x1 = std::min(x0 + 1, frame_width - 1);
    const int y1 = std::min(y0 + 1, frame_height - 1);
    const double ax = c.x() - x0;
    const double ay = c.y() - y0;
    auto at = [&](int x, int y) { return static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x); };
    const std::size_t i00 = at(x0, y0), i10 = at(x1, y0), i01 = at(x0, y1), i11 = at(x1, y1);
    if (!has[i00] || !has[i10] || !has[i01] || !has[i11]) return std::nullopt;
    const Vec2 u = (1 - ax) * (1 - ay) * back[i00] + ax * (1 - ay) * back[i10] +
                   (1 - ax) * ay * back[i01] + ax * ay * back[i11];
    const PointSample s = bilinear_sample(keyframe_points, u);
    if (!s.valid) return std::nullopt;
    return (s.point - keyframe_points.point(e.ux, e.uy)).norm();
  };

  std::size_t rejected = 0;
  for (auto& e : forward.entries) {
    if (!e.valid) continue;
    const auto err = round_trip(e);
    if (!err || (!soft && *err > threshold)) {
      e.valid = false;
      ++rejected;
    } else if (soft) {
      e.weight *= std::exp(-(*err) * (*err) / (2.0 * tau * tau));
    }
  }
  return rejected;
}

std::vector<std::uint8_t> multi_keyframe_filter(const std::vector<KeyframePrediction>& predictions,
                                                double threshold) {
  std::vector<std::uint8_t> keep(predictions.size(), 1);
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].canonical < predictions[b].canonical;
  });
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo + 1;
    while (hi < order.size() &&
           predictions[order[hi]].canonical == predictions[order[lo]].canonical) {
      ++hi;
    }
    if (hi - lo >= 2) {
      Vec3 mean = Vec3::Zero();
      for (std::size_t j = lo; j < hi; ++j) mean += predictions[order[j]].point;
      mean /= static_cast<double>(hi - lo);
      bool reject = false;
      for (std::size_t j = lo; j < hi; ++j) {
        if ((predictions[order[j]].point - mean).norm() > threshold) reject = true;
      }
      if (reject) {
        for (std::size_t j = lo; j < hi; ++j) keep[order[j]] = 0;
      }
    }
    lo = hi;
  }
  return keep;
}

namespace {

constexpr std::size_t kNoCanonical = std::numeric_limits<std::size_t>::max();

// Keyframe pixel -> canonical (frame 0) pixel, plus the continuous keyframe
// location of every canonical pixel seen there. Frame-0 points are carried
// into the keyframe by its tracked motion and splatted to the nearest pixel
// with a z-buffer; a splat only counts when it lands within `tolerance` of
// the keyframe's own point there.
struct CanonicalMap {
  std::vector<std::size_t> canonical;  // per keyframe pixel
  std::vector<Vec2> location;          // per canonical pixel
};

CanonicalMap canonical_map(const PointImage& canonical, const PointImage& keyframe,
                           const CameraIntrinsics& camera, const DeformationGraph& graph,
                           const SkinningTable& skin, const GraphMotion& motion, bool identity,
                           double tolerance) {
  CanonicalMap out{std::vector<std::size_t>(keyframe.size(), kNoCanonical),
                   std::vector<Vec2>(canonical.size(), Vec2::Zero())};
  if (identity) {
    for (std::size_t i = 0; i < canonical.size(); ++i) {
      if (!canonical.valid(i) || !skin.supported(i)) continue;
      out.canonical[i] = i;
      out.location[i] = canonical.pixel(i);
    }
    return out;
  }
  const PointImage warped = warp_cloud(canonical, graph, skin, motion);
  std::vector<double> zbuf(keyframe.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < warped.size(); ++i) {
    if (!warped.valid(i)) continue;
    const Vec3& q = warped.point(i);
    if (!(q.z() > 0.0)) continue;
    const Vec2 uv = project(q, camera);
    const long x = std::lround(uv.x());
    const long y = std::lround(uv.y());
    if (x < 0 || y < 0 || x >= keyframe.width() || y >= keyframe.height()) continue;
    const std::size_t k = keyframe.index(static_cast<int>(x), static_cast<int>(y));
    if (!keyframe.valid(k) || q.z() >= zbuf[k]) continue;
    zbuf[k] = q.z();
    out.canonical[k] = (q - keyframe.point(k)).norm() <= tolerance ? i : kNoCanonical;
    out.location[i] = uv;
  }
  return out;
}

// Bilinear interpolation of a keyframe's surviving forward field (target
// and weight) at a continuous keyframe location. Every pixel with non-zero
// weight must hold a surviving entry.
struct ForwardField {
  int width = 0;
  int height = 0;
  std::vector<Vec2> target;
  std::vector<double> weight;
  std::vector<std::uint8_t> has;

  ForwardField(int w, int h, const CorrespondenceSet& set)
      : width(w), height(h),
        target(static_cast<std::size_t>(w) * h, Vec2::Zero()),
        weight(static_cast<std::size_t>(w) * h, 0.0),
        has(static_cast<std::size_t>(w) * h, 0) {
    for (const auto& e : set.entries) {
      if (!e.valid) continue;
      const std::size_t i = static_cast<std::size_t>(e.uy) * w + static_cast<std::size_t>(e.ux);
      target[i] = e.target;
      weight[i] = e.weight;
      has[i] = 1;
    }
  }

  std::optional<std::pair<Vec2, double>> sample(const Vec2& loc) const {
    if (!loc.allFinite() || loc.x() < 0.0 || loc.y() < 0.0 || loc.x() > width - 1.0 ||
        loc.y() > height - 1.0) {
      return std::nullopt;
    }
    const int x0 = std::min(static_cast<int>(std::floor(loc.x())), width - 1);
    const int y0 = std::min(static_cast<int>(std::floor(loc.y())), height - 1);
    const double ax = loc.x() - x0;
    const double ay = loc.y() - y0;
    Vec2 t = Vec2::Zero();
    double w = 0.0;
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double c = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
        if (c == 0.0) continue;
        const int x = std::min(x0 + dx, width - 1);
        const int y = std::min(y0 + dy, height - 1);
        const std::size_t i = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
        if (!has[i]) return std::nullopt;
        t += c * target[i];
        w += c * weight[i];
      }
    }
    return std::make_pair(t, w);
  }
};

struct KeyframeWork {
  int keyframe;
  CorrespondenceSet forward;
  std::vector<std::size_t> canonical;  // per forward entry
  KeyframeStats stats;
};

}  // namespace

TrackedSequence track_sequence(const std::vector<PointImage>& frames,
                               const CameraIntrinsics& camera, const DeformationGraph& graph,
                               const SkinningTable& skin, CorrespondenceProvider& provider,
                               const KeyframePolicy& policy, const SolverConfig& config,
                               const std::vector<std::vector<Vec3>>& gt_translations) {
  policy.validate();
  config.validate();
  camera.validate();
  if (frames.size() < 2) {
    throw Error(ErrorCode::kInvalidInput, "track_sequence: need at least 2 frames");
  }
  const PointImage& canonical = frames.front();
  for (const auto& f : frames) {
    if (f.width() != canonical.width() || f.height() != canonical.height()) {
      throw Error(ErrorCode::kInvalidInput, "track_sequence: frame size mismatch");
    }
  }
  if (skin.width() != canonical.width() || skin.height() != canonical.height()) {
    throw Error(ErrorCode::kInvalidInput, "track_sequence: skinning table size mismatch");
  }
  if (!gt_translations.empty() && gt_translations.size() != frames.size()) {
    throw Error(ErrorCode::kInvalidInput, "track_sequence: ground truth frame count mismatch");
  }
  const int W = canonical.width();
  const int H = canonical.height();

  TrackedSequence out;
  out.frames.resize(frames.size());
  out.frames[0].frame = 0;
  out.frames[0].tracked = true;
  out.frames[0].motion = GraphMotion(graph.nodes.size());
  if (!gt_translations.empty()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) sum += gt_translations[0][i].norm();
    out.frames[0].graph_error3d = graph.nodes.empty() ? 0.0 : sum / graph.nodes.size();
  }

  std::vector<CanonicalMap> maps(frames.size());
  GraphMotion last = out.frames[0].motion;

  for (std::size_t f = 1; f < frames.size(); ++f) {
    FrameResult& result = out.frames[f];
    result.frame = static_cast<int>(f);
    result.motion = last;

    std::vector<KeyframeWork> work;
    for (std::size_t k = 0; k < f; k += static_cast<std::size_t>(policy.keyframe_interval)) {
      if (!out.frames[k].tracked) continue;
      if (maps[k].canonical.empty()) {
        maps[k] = canonical_map(canonical, frames[k], camera, graph, skin, out.frames[k].motion,
                                k == 0, policy.bidir_threshold);
      }
      KeyframeWork kw{static_cast<int>(k), {}, {}, {}};
      kw.stats.keyframe = static_cast<int>(k);
      CorrespondenceSet backward;
      try {
        kw.forward = provider.forward(static_cast<int>(k), static_cast<int>(f));
        backward = provider.backward(static_cast<int>(f), static_cast<int>(k));
      } catch (const Error& e) {
        if (!result.message.empty()) result.message += "; ";
        result.message += "keyframe " + std::to_string(k) + ": " + e.what();
        kw.forward.entries.clear();
        backward.entries.clear();
      }
      kw.stats.total = kw.forward.size();
      kw.canonical.assign(kw.forward.size(), kNoCanonical);
      for (std::size_t j = 0; j < kw.forward.size(); ++j) {
        Correspondence& e = kw.forward.entries[j];
        if (e.valid && e.ux >= 0 && e.uy >= 0 && e.ux < W && e.uy < H) {
          kw.canonical[j] = maps[k].canonical[frames[k].index(e.ux, e.uy)];
        }
        if (!e.valid || kw.canonical[j] == kNoCanonical) {
          e.valid = false;
          ++kw.stats.invalid_input;
        }
      }
      kw.stats.rejected_threshold = threshold_filter(kw.forward, policy.weight_threshold);
      kw.stats.rejected_bidirectional =
          bidirectional_filter(kw.forward, backward, frames[k], W, H, policy.bidir_threshold,
                               policy.soft_bidirectional, policy.soft_tau);
      work.push_back(std::move(kw));
    }

    // Multi-keyframe consistency on the predicted frame points.
    std::vector<KeyframePrediction> predictions;
    std::vector<std::pair<std::size_t, std::size_t>> owner;  // (work index, entry)
    for (std::size_t w = 0; w < work.size(); ++w) {
      for (std::size_t j = 0; j < work[w].forward.size(); ++j) {
        const Correspondence& e = work[w].forward.entries[j];
        if (!e.valid) continue;
        const PointSample s = bilinear_sample(frames[f], e.target);
        if (!s.valid) continue;
        predictions.push_back({work[w].canonical[j], s.point});
        owner.emplace_back(w, j);
      }
    }
    const auto keep = multi_keyframe_filter(predictions, policy.multikf_threshold);
    for (std::size_t p = 0; p < keep.size(); ++p) {
      if (keep[p]) continue;
      auto& kw = work[owner[p].first];
      kw.forward.entries[owner[p].second].valid = false;
      ++kw.stats.rejected_multi_keyframe;
    }

    // Most recent keyframe first so that it wins duplicate canonical pixels.
    std::vector<std::uint8_t> taken(canonical.size(), 0);
    CorrespondenceSet pooled;
    for (auto it = work.rbegin(); it != work.rend(); ++it) {
      KeyframeWork& kw = *it;
      kw.stats.survivors = kw.forward.valid_count();
      kw.stats.kept = kw.stats.total > 0 && kw.stats.survivors > 0 &&
                      static_cast<double>(kw.stats.survivors) >=
                          policy.min_valid_fraction * static_cast<double>(kw.stats.total);
      if (!kw.stats.kept) continue;
      // Canonical pixels take the forward field at their exact keyframe
      // location rather than at the rounded pixel.
      const ForwardField field(W, H, kw.forward);
      const CanonicalMap& map = maps[static_cast<std::size_t>(kw.keyframe)];
      for (std::size_t q = 0; q < map.canonical.size(); ++q) {
        const std::size_t c = map.canonical[q];
        if (c == kNoCanonical || taken[c]) continue;
        const auto s = field.sample(map.location[c]);
        if (!s) continue;
        taken[c] = 1;
        const Vec2 px = canonical.pixel(c);
        pooled.entries.push_back({static_cast<int>(px.x()), static_cast<int>(px.y()), s->first,
                                  s->second, true});
      }
    }
    std::sort(pooled.entries.begin(), pooled.entries.end(),
              [](const Correspondence& a, const Correspondence& b) {
                return a.uy != b.uy ? a.uy < b.uy : a.ux < b.ux;
              });
    for (const auto& kw : work) {
      result.keyframes.push_back(kw.stats);
      if (kw.stats.kept) result.valid_keyframes.push_back(kw.keyframe);
    }
    result.correspondences = pooled.size();

    if (result.valid_keyframes.empty() || pooled.entries.empty()) {
      if (!result.message.empty()) result.message += "; ";
      result.message += "no valid keyframe";
      continue;
    }
    try {
      const TrackingProblem problem{camera, canonical, frames[f], graph, skin, pooled};
      SolveResult solve = gauss_newton_solve(problem, config);
      result.motion = std::move(solve.motion);
      result.tracked = true;
      last = result.motion;
      if (!gt_translations.empty()) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
          if (!solve.active_nodes.empty() && !solve.active_nodes[i]) continue;
          sum += (result.motion.translations[i] - gt_translations[f][i]).norm();
          ++n;
        }
        result.graph_error3d = n ? sum / static_cast<double>(n) : 0.0;
      }
    } catch (const Error& e) {
      if (!result.message.empty()) result.message += "; ";
      result.message += e.what();
    }
  }
  return out;
}

}  // namespace ntrack
