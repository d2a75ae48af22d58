#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "ntrack/deformgraph.hpp"
#include "ntrack/energy.hpp"
#include "ntrack/geometry.hpp"
#include "ntrack/warpfield.hpp"

namespace ntrack {

enum class SceneKind { kRigid, kArticulatedBend, kSmoothSine, kTwoCluster };

const char* to_string(SceneKind kind);
/// Throws kInvalidInput for an unknown name.
SceneKind scene_kind_from_string(const std::string& name);

/// Deformation parameters. Unset fields are drawn from the seed.
struct DeformParams {
  std::optional<Vec3> rotation;     // rigid: axis-angle about the object center
  std::optional<Vec3> translation;  // rigid: meters
  std::optional<double> bend_angle;      // articulated_bend: radians
  std::optional<double> sine_amplitude;  // smooth_sine: meters
  std::optional<double> sine_wavelength; // smooth_sine: meters
  std::optional<double> sine_phase;
  // two_cluster: independent rigid motions of the two patches
  std::optional<Vec3> rotation_b;
  std::optional<Vec3> translation_b;
};

/// Fully resolved parameters, as recorded in scene.json.
struct ResolvedParams {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  double bend_angle = 0.0;
  double sine_amplitude = 0.0;
  double sine_wavelength = 1.0;
  double sine_phase = 0.0;
  Vec3 rotation_b = Vec3::Zero();
  Vec3 translation_b = Vec3::Zero();
  Vec3 plane_tilt = Vec3::Zero();  // axis-angle applied to the base plane
};

/// Planar object: center c0, in-plane axes e1 (along a) and e2 (along b),
/// normal n = e1 x e2 pointing away from the camera, and one or two
/// rectangular footprints in (a, b).
struct SurfaceModel {
  Vec3 center = Vec3::Zero();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  struct Rect {
    double a0, a1, b0, b1;
  };
  std::vector<Rect> footprint;

  Vec3 point(double a, double b) const { return center + a * e1 + b * e2; }
  Vec3 normal() const { return e1.cross(e2); }
  /// Footprint rectangle containing (a, b), or -1.
  int region(double a, double b) const;
};

/// Ground-truth deformation: deformed position of the surface point with
/// parameters (a, b).
using Deformation = std::function<Vec3(const Vec2&)>;

/// The deformation of `kind` with every magnitude scaled by `scale`
/// (0 = identity, 1 = the full parameters).
Deformation make_deformation(SceneKind kind, const SurfaceModel& surface,
                             const ResolvedParams& params, double scale = 1.0);

/// Surface rendering: depth plus the surface parameters seen at each pixel.
struct Rendering {
  DepthImage depth;
  std::vector<Vec2> params;  // (a, b) per valid pixel
};

/// Exact rendering of the deformed surface: z-buffered splats of a 2x
/// supersampled parameter grid seed a per-pixel Newton solve of
/// project(G(S(a, b))) = pixel.
Rendering render_surface(const SurfaceModel& surface, const Deformation& deform,
                         const CameraIntrinsics& camera, int width, int height);

/// Distance below which a flowed point counts as visible in a rendering.
inline constexpr double kVisibilityTolerance = 1e-4;

struct SyntheticScene {
  SceneKind kind = SceneKind::kRigid;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  CameraIntrinsics camera;
  ResolvedParams params;
  GraphOptions graph_options;
  SurfaceModel surface;
  std::vector<Vec2> source_params;  // (a, b) per valid source pixel

  DepthImage source_depth;
  DepthImage target_depth;
  PointImage source;
  PointImage target;

  DeformationGraph graph;
  SkinningTable skin;
  GraphMotion gt_motion;  // rotations and translations t~
  SceneFlow flow;         // S~, valid on every valid source pixel

  std::vector<Vec2> gt_corr;               // C~ = project(p + S~) per pixel
  std::vector<std::uint8_t> corr_mask;     // M~C: mutually visible pixels
  std::vector<std::uint8_t> node_mask;     // M~V: nodes visible after the motion
  std::vector<std::uint8_t> flow_mask;     // M~S
  CorrespondenceSet correspondences;       // exact C~ on M~C, weights 1

  std::vector<Vec3> gt_translations() const { return gt_motion.translations; }
};

struct SceneOptions {
  DeformParams deform;
  std::optional<GraphOptions> graph;
};

/// Throws kGeneration for resolutions below 16x16 or degenerate
/// parameters.
SyntheticScene generate_scene(SceneKind kind, int width, int height, std::uint64_t seed,
                              const SceneOptions& options = {});

struct OutlierInjection {
  CorrespondenceSet correspondences;
  std::vector<std::uint8_t> outlier;  // per entry
};

/// Replaces exactly round(fraction * valid entries) targets with uniform
/// in-image locations, resampling candidates that land within 0.1 m of the
/// true target point or on invalid target depth. All weights are reset to 1.
OutlierInjection inject_outliers(const SyntheticScene& scene, const CorrespondenceSet& input,
                                 double fraction, std::uint64_t seed);

/// Gaussian perturbation of the correspondence targets (pixels) and of the
/// valid target depths (meters). Masks and ground truth are unchanged.
SyntheticScene add_noise(const SyntheticScene& scene, double corr_sigma_px,
                         double depth_sigma_m, std::uint64_t seed);

/// Frames of a deformation that grows linearly from frame 0 (undeformed)
/// to the full scene deformation at the last frame.
struct SyntheticSequence {
  SyntheticScene base;  // source = frame 0, target = last frame
  std::vector<DepthImage> depths;
  std::vector<PointImage> points;
  std::vector<GraphMotion> gt_motion;  // frame 0 -> f, on base.graph
  std::vector<std::vector<Vec2>> params;  // surface (a, b) per pixel per frame
  std::vector<Deformation> deformations;

  /// Exact correspondences from every valid, mutually visible pixel of
  /// frame `from` to frame `to`.
  CorrespondenceSet correspondences(int from, int to) const;
};

/// Frame f applies make_deformation with scale f / (frames - 1).
SyntheticSequence generate_sequence(SceneKind kind, int width, int height, int frames,
                                    std::uint64_t seed, const SceneOptions& options = {});

/// Uniform double in [0, 1) from the top 53 bits of one engine output.
double uniform01(std::uint64_t bits);

}  // namespace ntrack
