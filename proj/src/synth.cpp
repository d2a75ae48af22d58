#include "ntrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <Eigen/LU>

#include "ntrack/error.hpp"

namespace ntrack {

const char* to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::kRigid: return "rigid";
    case SceneKind::kArticulatedBend: return "articulated_bend";
    case SceneKind::kSmoothSine: return "smooth_sine";
    case SceneKind::kTwoCluster: return "two_cluster";
  }
  return "unknown";
}

SceneKind scene_kind_from_string(const std::string& name) {
  for (SceneKind k : {SceneKind::kRigid, SceneKind::kArticulatedBend, SceneKind::kSmoothSine,
                      SceneKind::kTwoCluster}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidInput, "unknown scene kind '" + name + "'");
}

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

int SurfaceModel::region(double a, double b) const {
  for (std::size_t r = 0; r < footprint.size(); ++r) {
    const Rect& f = footprint[r];
    if (a >= f.a0 && a <= f.a1 && b >= f.b0 && b <= f.b1) return static_cast<int>(r);
  }
  return -1;
}

namespace {

constexpr double kDepth = 1.5;
constexpr double kBendBlend = 0.05;  // half-width of the hinge blend, meters

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng());
}

// Box-Muller on two raw draws.
double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng());
  const double u2 = uniform01(rng());
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

CameraIntrinsics scene_camera(int width, int height) {
  const double f = 1.5 * std::min<double>(width, height * 4.0 / 3.0);
  return {f, f, 0.5 * (width - 1), 0.5 * (height - 1)};
}

SurfaceModel scene_surface(SceneKind kind, const Vec3& tilt) {
  SurfaceModel s;
  s.center = {0.0, 0.0, kDepth};
  const Mat3 r = exp_so3(tilt);
  s.e1 = r.col(0);
  s.e2 = r.col(1);
  if (kind == SceneKind::kTwoCluster) {
    s.footprint = {{-0.3, -0.1, -0.15, 0.15}, {0.1, 0.3, -0.15, 0.15}};
  } else {
    s.footprint = {{-0.2, 0.2, -0.15, 0.15}};
  }
  return s;
}

ResolvedParams resolve_params(SceneKind kind, std::uint64_t seed, const DeformParams& in) {
  std::mt19937_64 rng(seed);
  ResolvedParams p;
  // Every draw happens regardless of kind and overrides so that a given
  // seed always yields the same stream.
  p.plane_tilt = {uniform(rng, -0.08, 0.08), uniform(rng, -0.08, 0.08), 0.0};
  for (int k = 0; k < 3; ++k) p.rotation[k] = uniform(rng, -0.05, 0.05);
  for (int k = 0; k < 3; ++k) p.translation[k] = uniform(rng, -0.03, 0.03);
  p.bend_angle = uniform(rng, 15.0, 30.0) * std::numbers::pi / 180.0;
  p.sine_amplitude = uniform(rng, 0.003, 0.006);
  p.sine_wavelength = uniform(rng, 0.5, 0.8);
  p.sine_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  for (int k = 0; k < 3; ++k) p.rotation_b[k] = uniform(rng, -0.05, 0.05);
  for (int k = 0; k < 3; ++k) p.translation_b[k] = uniform(rng, -0.03, 0.03);

  if (in.rotation) p.rotation = *in.rotation;
  if (in.translation) p.translation = *in.translation;
  if (in.bend_angle) p.bend_angle = *in.bend_angle;
  if (in.sine_amplitude) p.sine_amplitude = *in.sine_amplitude;
  if (in.sine_wavelength) p.sine_wavelength = *in.sine_wavelength;
  if (in.sine_phase) p.sine_phase = *in.sine_phase;
  if (in.rotation_b) p.rotation_b = *in.rotation_b;
  if (in.translation_b) p.translation_b = *in.translation_b;

  auto bad = [](const char* what) { throw Error(ErrorCode::kGeneration, what); };
  if (!p.rotation.allFinite() || !p.translation.allFinite() || !p.rotation_b.allFinite() ||
      !p.translation_b.allFinite() || !std::isfinite(p.bend_angle) ||
      !std::isfinite(p.sine_amplitude) || !std::isfinite(p.sine_wavelength) ||
      !std::isfinite(p.sine_phase)) {
    bad("generate_scene: non-finite parameter");
  }
  if (kind != SceneKind::kArticulatedBend) {
    if (p.rotation.norm() > 0.5 || p.translation.norm() > 0.2) {
      bad("generate_scene: rigid motion too large (|rotation| <= 0.5, |translation| <= 0.2)");
    }
  }
  if (kind == SceneKind::kTwoCluster &&
      (p.rotation_b.norm() > 0.5 || p.translation_b.norm() > 0.2)) {
    bad("generate_scene: second rigid motion too large");
  }
  if (kind == SceneKind::kArticulatedBend &&
      (p.bend_angle < 0.0 || p.bend_angle > std::numbers::pi / 3.0)) {
    bad("generate_scene: bend angle must lie in [0, 60] degrees");
  }
  if (kind == SceneKind::kSmoothSine &&
      (p.sine_wavelength < 0.05 || std::abs(p.sine_amplitude) > 0.1 * p.sine_wavelength)) {
    bad("generate_scene: sine amplitude must not exceed a tenth of the wavelength >= 0.05");
  }
  return p;
}

// Newton solve of project(G(a, b)) = pixel from `seed`; empty unless it
// converges onto the footprint.
std::optional<Vec2> invert_pixel(const SurfaceModel& surface, const Deformation& deform,
                                 const CameraIntrinsics& camera, const Vec2& pixel, Vec2 ab) {
  constexpr double kStep = 1e-6;
  for (int it = 0; it < 40; ++it) {
    const Vec3 x = deform(ab);
    if (!(x.z() > 0.0)) return std::nullopt;
    const Vec2 r = project(x, camera) - pixel;
    if (r.cwiseAbs().maxCoeff() < 1e-10) {
      if (surface.region(ab.x(), ab.y()) < 0) return std::nullopt;
      return ab;
    }
    Eigen::Matrix2d j;
    for (int k = 0; k < 2; ++k) {
      Vec2 hp = ab, hm = ab;
      hp[k] += kStep;
      hm[k] -= kStep;
      const Vec3 xp = deform(hp), xm = deform(hm);
      if (!(xp.z() > 0.0) || !(xm.z() > 0.0)) return std::nullopt;
      j.col(k) = (project(xp, camera) - project(xm, camera)) / (2.0 * kStep);
    }
    if (std::abs(j.determinant()) < 1e-12) return std::nullopt;
    Vec2 step = j.lu().solve(-r);
    const double n = step.norm();
    if (n > 0.05) step *= 0.05 / n;
    ab += step;
    if (!ab.allFinite()) return std::nullopt;
  }
  return std::nullopt;
}

GraphMotion node_ground_truth(const SurfaceModel& surface, const Deformation& deform,
                              const DeformationGraph& graph) {
  GraphMotion m(graph.node_count());
  const Mat3 frame = (Mat3() << surface.e1, surface.e2, surface.normal()).finished();
  constexpr double h = 1e-5;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const Vec3 d = graph.nodes[i] - surface.center;
    const Vec2 ab{d.dot(surface.e1), d.dot(surface.e2)};
    m.translations[i] = deform(ab) - graph.nodes[i];
    const Vec3 ga = (deform(ab + Vec2(h, 0)) - deform(ab - Vec2(h, 0))) / (2 * h);
    const Vec3 gb = (deform(ab + Vec2(0, h)) - deform(ab - Vec2(0, h))) / (2 * h);
    const Mat3 image = (Mat3() << ga, gb, ga.cross(gb).normalized()).finished();
    m.rotations[i] = orthonormalize(image * frame.transpose());
  }
  return m;
}

bool visible(const PointImage& target, const CameraIntrinsics& camera, const Vec3& x,
             Vec2* loc) {
  if (!(x.z() > 0.0)) return false;
  const Vec2 c = project(x, camera);
  if (loc) *loc = c;
  const PointSample s = bilinear_sample(target, c);
  return s.valid && (s.point - x).norm() < kVisibilityTolerance;
}

}  // namespace

Deformation make_deformation(SceneKind kind, const SurfaceModel& surface,
                             const ResolvedParams& params, double scale) {
  switch (kind) {
    case SceneKind::kRigid: {
      const Mat3 r = exp_so3(scale * params.rotation);
      const Vec3 t = scale * params.translation;
      return [surface, r, t](const Vec2& ab) {
        return Vec3(r * (surface.point(ab.x(), ab.y()) - surface.center) + surface.center + t);
      };
    }
    case SceneKind::kArticulatedBend: {
      const double angle = scale * params.bend_angle;
      // Hinge along e2 through the center; the a > 0 half turns toward the
      // camera.
      return [surface, angle](const Vec2& ab) {
        const double theta = angle * smoothstep((ab.x() + kBendBlend) / (2.0 * kBendBlend));
        const Vec3 p = surface.point(ab.x(), ab.y());
        return Vec3(surface.center + exp_so3(theta * surface.e2) * (p - surface.center));
      };
    }
    case SceneKind::kSmoothSine: {
      const double amp = scale * params.sine_amplitude;
      const double k = 2.0 * std::numbers::pi / params.sine_wavelength;
      const double phase = params.sine_phase;
      // A sine wave along a, toward the camera, followed by a small rigid
      // motion about the center.
      const Mat3 r = exp_so3(scale * params.rotation);
      const Vec3 t = scale * params.translation;
      return [surface, amp, k, phase, r, t](const Vec2& ab) {
        const Vec3 p = surface.point(ab.x(), ab.y()) -
                       amp * std::sin(k * ab.x() + phase) * surface.normal();
        return Vec3(r * (p - surface.center) + surface.center + t);
      };
    }
    case SceneKind::kTwoCluster: {
      const Mat3 ra = exp_so3(scale * params.rotation);
      const Mat3 rb = exp_so3(scale * params.rotation_b);
      const Vec3 ta = scale * params.translation;
      const Vec3 tb = scale * params.translation_b;
      return [surface, ra, rb, ta, tb](const Vec2& ab) {
        const bool second = ab.x() > 0.0;
        const auto& f = surface.footprint[second ? 1 : 0];
        const Vec3 pivot = surface.point(0.5 * (f.a0 + f.a1), 0.5 * (f.b0 + f.b1));
        const Vec3 p = surface.point(ab.x(), ab.y());
        return second ? Vec3(rb * (p - pivot) + pivot + tb) : Vec3(ra * (p - pivot) + pivot + ta);
      };
    }
  }
  throw Error(ErrorCode::kInvalidInput, "make_deformation: unknown kind");
}

Rendering render_surface(const SurfaceModel& surface, const Deformation& deform,
                         const CameraIntrinsics& camera, int width, int height) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  Rendering out;
  out.depth = DepthImage(width, height);
  out.params.assign(n, Vec2::Zero());

  // Splat a parameter grid at twice the pixel density of the surface.
  const double step = 0.5 * surface.center.z() / camera.fx;
  std::vector<double> zbuf(n, std::numeric_limits<double>::infinity());
  std::vector<Vec2> seed(n, Vec2::Zero());
  for (const auto& f : surface.footprint) {
    const int na = static_cast<int>(std::ceil((f.a1 - f.a0) / step)) + 1;
    const int nb = static_cast<int>(std::ceil((f.b1 - f.b0) / step)) + 1;
    for (int j = 0; j < nb; ++j) {
      for (int i = 0; i < na; ++i) {
        const Vec2 ab{f.a0 + (f.a1 - f.a0) * i / (na - 1), f.b0 + (f.b1 - f.b0) * j / (nb - 1)};
        const Vec3 x = deform(ab);
        if (!(x.z() > 0.0)) continue;
        const Vec2 c = project(x, camera);
        const long ix = std::lround(c.x());
        const long iy = std::lround(c.y());
        if (ix < 0 || iy < 0 || ix >= width || iy >= height) continue;
        const std::size_t px = static_cast<std::size_t>(iy) * width + static_cast<std::size_t>(ix);
        if (x.z() < zbuf[px]) {
          zbuf[px] = x.z();
          seed[px] = ab;
        }
      }
    }
  }

  auto try_pixel = [&](std::size_t px, const Vec2& start) {
    const Vec2 pixel{static_cast<double>(px % width), static_cast<double>(px / width)};
    const auto ab = invert_pixel(surface, deform, camera, pixel, start);
    if (!ab) return false;
    out.depth.set(px, deform(*ab).z());
    out.params[px] = *ab;
    return out.depth.valid(px);
  };
  for (std::size_t px = 0; px < n; ++px) {
    if (std::isfinite(zbuf[px])) try_pixel(px, seed[px]);
  }
  // Pixels the splats missed: seed from a solved 4-neighbor.
  for (int pass = 0; pass < 4; ++pass) {
    std::vector<std::size_t> filled;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t px = out.depth.index(x, y);
        if (out.depth.valid(px) || std::isfinite(zbuf[px])) continue;
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || ny[k] < 0 || nx[k] >= width || ny[k] >= height) continue;
          const std::size_t q = out.depth.index(nx[k], ny[k]);
          if (!out.depth.valid(q)) continue;
          const auto ab = invert_pixel(surface, deform, camera,
                                       {static_cast<double>(x), static_cast<double>(y)},
                                       out.params[q]);
          if (ab) filled.push_back(px), out.params[px] = *ab;
          break;
        }
      }
    }
    if (filled.empty()) break;
    for (std::size_t px : filled) {
      zbuf[px] = 0.0;  // attempted
      out.depth.set(px, deform(out.params[px]).z());
    }
  }
  return out;
}

SyntheticScene generate_scene(SceneKind kind, int width, int height, std::uint64_t seed,
                              const SceneOptions& options) {
  if (width < 16 || height < 16) {
    throw Error(ErrorCode::kGeneration, "generate_scene: resolution must be at least 16x16");
  }
  SyntheticScene s;
  s.kind = kind;
  s.seed = seed;
  s.width = width;
  s.height = height;
  s.camera = scene_camera(width, height);
  s.params = resolve_params(kind, seed, options.deform);
  s.surface = scene_surface(kind, s.params.plane_tilt);

  const double spacing = kDepth / s.camera.fx;
  s.graph_options = options.graph.value_or(GraphOptions{0.05, 8, std::max(0.05, 4.0 * spacing)});

  const Deformation identity = make_deformation(kind, s.surface, s.params, 0.0);
  const Deformation deform = make_deformation(kind, s.surface, s.params, 1.0);
  Rendering src = render_surface(s.surface, identity, s.camera, width, height);
  Rendering tgt = render_surface(s.surface, deform, s.camera, width, height);
  s.source_depth = std::move(src.depth);
  s.source_params = std::move(src.params);
  s.target_depth = std::move(tgt.depth);
  s.source = PointImage::from_depth(s.source_depth, s.camera);
  s.target = PointImage::from_depth(s.target_depth, s.camera);
  if (s.source.valid_count() < 16 || s.target.valid_count() < 16) {
    throw Error(ErrorCode::kGeneration, "generate_scene: object not visible");
  }

  s.graph = build_graph(s.source, s.graph_options);
  s.skin = compute_skinning(s.source, s.graph.nodes, s.graph.sigma);
  s.gt_motion = node_ground_truth(s.surface, deform, s.graph);

  const std::size_t n = s.source.size();
  s.flow = SceneFlow(width, height);
  s.gt_corr.assign(n, Vec2::Zero());
  s.corr_mask.assign(n, 0);
  for (std::size_t px = 0; px < n; ++px) {
    if (!s.source.valid(px)) continue;
    const Vec3 x = deform(s.source_params[px]);
    s.flow.flow[px] = x - s.source.point(px);
    s.flow.valid[px] = 1;
    Vec2 c = Vec2::Zero();
    if (visible(s.target, s.camera, x, &c)) {
      s.corr_mask[px] = 1;
      const Vec2 u = s.source.pixel(px);
      s.correspondences.entries.push_back(
          {static_cast<int>(u.x()), static_cast<int>(u.y()), c, 1.0, true});
    }
    if (x.z() > 0.0) s.gt_corr[px] = project(x, s.camera);
  }
  s.flow_mask = s.flow.valid;
  s.node_mask.assign(s.graph.node_count(), 0);
  for (std::size_t i = 0; i < s.graph.node_count(); ++i) {
    s.node_mask[i] =
        visible(s.target, s.camera, s.graph.nodes[i] + s.gt_motion.translations[i], nullptr);
  }
  if (s.correspondences.size() < 3) {
    throw Error(ErrorCode::kGeneration, "generate_scene: fewer than 3 visible correspondences");
  }
  return s;
}

OutlierInjection inject_outliers(const SyntheticScene& scene, const CorrespondenceSet& input,
                                 double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "inject_outliers: fraction must lie in [0, 1)");
  }
  OutlierInjection out;
  out.correspondences = input;
  out.outlier.assign(input.size(), 0);
  for (auto& e : out.correspondences.entries) e.weight = 1.0;

  std::vector<std::size_t> valid;
  for (std::size_t k = 0; k < input.size(); ++k) {
    if (input.entries[k].valid) valid.push_back(k);
  }
  const auto count = static_cast<std::size_t>(std::llround(fraction * valid.size()));
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng() % (valid.size() - k));
    std::swap(valid[k], valid[j]);
  }
  std::vector<std::size_t> chosen(valid.begin(), valid.begin() + static_cast<long>(count));
  std::sort(chosen.begin(), chosen.end());

  const double w = scene.width - 1;
  const double h = scene.height - 1;
  for (std::size_t k : chosen) {
    Correspondence& e = out.correspondences.entries[k];
    const PointSample truth = bilinear_sample(scene.target, e.target);
    Vec2 c = e.target;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      c = {w * uniform01(rng()), h * uniform01(rng())};
      const PointSample s = bilinear_sample(scene.target, c);
      if (!s.valid) continue;
      if (!truth.valid || (s.point - truth.point).norm() > 0.1) break;
    }
    e.target = c;
    out.outlier[k] = 1;
  }
  return out;
}

SyntheticScene add_noise(const SyntheticScene& scene, double corr_sigma_px, double depth_sigma_m,
                         std::uint64_t seed) {
  if (!(corr_sigma_px >= 0.0) || !(depth_sigma_m >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "add_noise: sigmas must be non-negative");
  }
  SyntheticScene out = scene;
  std::mt19937_64 rng(seed);
  if (corr_sigma_px > 0.0) {
    for (auto& e : out.correspondences.entries) {
      e.target.x() += corr_sigma_px * gaussian(rng);
      e.target.y() += corr_sigma_px * gaussian(rng);
    }
  }
  if (depth_sigma_m > 0.0) {
    for (std::size_t px = 0; px < out.target_depth.size(); ++px) {
      if (!out.target_depth.valid(px)) continue;
      out.target_depth.set(px, out.target_depth.depth(px) + depth_sigma_m * gaussian(rng));
    }
    out.target = PointImage::from_depth(out.target_depth, out.camera);
  }
  return out;
}

CorrespondenceSet SyntheticSequence::correspondences(int from, int to) const {
  const int frames = static_cast<int>(depths.size());
  if (from < 0 || to < 0 || from >= frames || to >= frames) {
    throw Error(ErrorCode::kInvalidInput, "SyntheticSequence: frame index out of range");
  }
  CorrespondenceSet set;
  const PointImage& src = points[from];
  for (std::size_t px = 0; px < src.size(); ++px) {
    if (!src.valid(px)) continue;
    const Vec3 x = deformations[to](params[from][px]);
    Vec2 c = Vec2::Zero();
    if (!visible(points[to], base.camera, x, &c)) continue;
    const Vec2 u = src.pixel(px);
    set.entries.push_back({static_cast<int>(u.x()), static_cast<int>(u.y()), c, 1.0, true});
  }
  return set;
}

SyntheticSequence generate_sequence(SceneKind kind, int width, int height, int frames,
                                    std::uint64_t seed, const SceneOptions& options) {
  if (frames < 2) throw Error(ErrorCode::kGeneration, "generate_sequence: need >= 2 frames");
  SyntheticSequence seq;
  seq.base = generate_scene(kind, width, height, seed, options);
  const SyntheticScene& b = seq.base;
  for (int f = 0; f < frames; ++f) {
    const double scale = static_cast<double>(f) / (frames - 1);
    Deformation d = make_deformation(kind, b.surface, b.params, scale);
    Rendering r = render_surface(b.surface, d, b.camera, width, height);
    seq.points.push_back(PointImage::from_depth(r.depth, b.camera));
    seq.depths.push_back(std::move(r.depth));
    seq.params.push_back(std::move(r.params));
    seq.gt_motion.push_back(node_ground_truth(b.surface, d, b.graph));
    seq.deformations.push_back(std::move(d));
  }
  return seq;
}

}  // namespace ntrack
