#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ntrack/energy.hpp"
#include "ntrack/solver.hpp"

namespace ntrack {

struct KeyframePolicy {
  int keyframe_interval = 50;
  double weight_threshold = 0.35;   // delta
  double min_valid_fraction = 0.5;
  double bidir_threshold = 0.20;    // meters
  double multikf_threshold = 0.15;  // meters
  /// Scale weights by exp(-err^2 / (2 tau^2)) instead of rejecting on the
  /// round-trip distance.
  bool soft_bidirectional = false;
  double soft_tau = 0.1;

  /// Throws kInvalidInput unless the interval and thresholds are positive
  /// and min_valid_fraction lies in (0, 1].
  void validate() const;
};

/// Invalidates valid entries with w < delta; w == delta is kept. Returns the
/// number rejected.
std::size_t threshold_filter(CorrespondenceSet& set, double delta);

/// Forward entries map keyframe pixels into the frame, backward entries map
/// frame pixels back. Each valid forward entry is followed to c_u, the
/// backward field is sampled bilinearly there (all four neighbors must hold
/// valid entries), and the keyframe point at the returned location is
/// compared with p_u. Entries whose round trip fails or lands more than
/// `threshold` meters away are invalidated (or reweighted in soft mode,
/// where only failed round trips are rejected). Returns the number rejected.
std::size_t bidirectional_filter(CorrespondenceSet& forward, const CorrespondenceSet& backward,
                                 const PointImage& keyframe_points, int frame_width,
                                 int frame_height, double threshold, bool soft = false,
                                 double tau = 0.1);

struct KeyframePrediction {
  std::size_t canonical;  // canonical point id
  Vec3 point;             // predicted 3D location in the current frame
};

/// Keep flags: every prediction of a canonical point is rejected when any
/// of them lies more than `threshold` from their mean. Points predicted
/// once are kept.
std::vector<std::uint8_t> multi_keyframe_filter(const std::vector<KeyframePrediction>& predictions,
                                                double threshold);

/// Supplies correspondences between a keyframe and a frame.
class CorrespondenceProvider {
 public:
  virtual ~CorrespondenceProvider() = default;
  /// Keyframe pixels -> locations in the frame.
  virtual CorrespondenceSet forward(int keyframe, int frame) = 0;
  /// Frame pixels -> locations in the keyframe.
  virtual CorrespondenceSet backward(int frame, int keyframe) = 0;
};

/// Counts per keyframe; the five categories sum to `total`.
struct KeyframeStats {
  int keyframe = -1;
  std::size_t total = 0;
  std::size_t invalid_input = 0;  // invalid on arrival, or no canonical point
  std::size_t rejected_threshold = 0;
  std::size_t rejected_bidirectional = 0;
  std::size_t rejected_multi_keyframe = 0;
  std::size_t survivors = 0;
  bool kept = false;
};

struct FrameResult {
  int frame = 0;
  bool tracked = false;
  GraphMotion motion;  // frame 0 -> frame; last tracked motion when untracked
  std::vector<KeyframeStats> keyframes;
  std::vector<int> valid_keyframes;
  std::size_t correspondences = 0;  // pooled entries passed to the solver
  std::optional<double> graph_error3d;
  std::string message;
};

struct TrackedSequence {
  std::vector<FrameResult> frames;
};

/// Frame 0 is canonical and carries `graph` and `skin`. For every later
/// frame the earlier tracked keyframes are filtered (threshold, then
/// bidirectional, then multi-keyframe), keyframes below min_valid_fraction
/// are dropped, and one Gauss-Newton problem is solved on the pooled
/// correspondences, re-indexed to canonical pixels. A canonical pixel takes
/// the keyframe's surviving forward field interpolated at its tracked
/// keyframe location; one seen by several keyframes uses the most recent. Frames without a usable
/// keyframe or whose solve fails are flagged untracked.
/// `gt_translations`, if non-empty, holds t~ per frame for GraphError3D.
TrackedSequence track_sequence(const std::vector<PointImage>& frames,
                               const CameraIntrinsics& camera, const DeformationGraph& graph,
                               const SkinningTable& skin, CorrespondenceProvider& provider,
                               const KeyframePolicy& policy, const SolverConfig& config,
                               const std::vector<std::vector<Vec3>>& gt_translations = {});

}  // namespace ntrack
