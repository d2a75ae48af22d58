#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ntrack/deformgraph.hpp"
#include "ntrack/energy.hpp"
#include "ntrack/geometry.hpp"
#include "ntrack/synth.hpp"
#include "ntrack/warpfield.hpp"

namespace ntrack::io {

namespace fs = std::filesystem;

// All binary formats are little-endian. Failures throw Error(kIo), malformed
// content Error(kInvalidInput).

/// "DGN1", u32 width, u32 height, f32 depth row-major; 0 = invalid.
DepthImage read_depth_dgn(const fs::path& path);
void write_depth_dgn(const fs::path& path, const DepthImage& depth);

/// 16-bit grayscale PNG in millimeters; 0 = invalid.
DepthImage read_depth_png(const fs::path& path);
void write_depth_png(const fs::path& path, const DepthImage& depth);

/// Dispatches on the extension (.png or anything else as DGN1).
DepthImage read_depth(const fs::path& path);

CameraIntrinsics read_intrinsics(const fs::path& path);
void write_intrinsics(const fs::path& path, const CameraIntrinsics& camera);

/// {"nodes": [[x,y,z]..], "edges": [[j..]..], "clusters": [..], "sigma": s}
DeformationGraph read_graph(const fs::path& path);
void write_graph(const fs::path& path, const DeformationGraph& graph);

/// "SKN1", u32 width, u32 height, then per pixel 4 x u32 node index
/// (0xFFFFFFFF unused) and 4 x f32 weight. Weights are renormalized in
/// double precision on load.
SkinningTable read_skinning(const fs::path& path);
void write_skinning(const fs::path& path, const SkinningTable& skin);

/// [{"R": [9 row-major], "t": [3]}, ...]
GraphMotion read_motion(const fs::path& path);
void write_motion(const fs::path& path, const GraphMotion& motion);
std::string motion_to_json(const GraphMotion& motion);

/// "COR1", u32 count, then per entry u16 ux, u16 uy, f32 cx, f32 cy, f32 w,
/// u8 valid (17 bytes, packed).
CorrespondenceSet read_correspondences(const fs::path& path);
void write_correspondences(const fs::path& path, const CorrespondenceSet& set);

/// "SFL1", u32 width, u32 height, then f32 (x, y, z) per pixel; invalid
/// pixels hold NaN.
SceneFlow read_scene_flow(const fs::path& path);
void write_scene_flow(const fs::path& path, const SceneFlow& flow);

struct SceneMasks {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> corr_mask;
  std::vector<std::uint8_t> flow_mask;
  std::vector<std::uint8_t> node_mask;
};

/// "MSK1", u32 width, u32 height, u32 node count, u8 M~C per pixel, u8 M~S
/// per pixel, u8 M~V per node.
SceneMasks read_masks(const fs::path& path);
void write_masks(const fs::path& path, const SceneMasks& masks);

/// Writes source.dgn, target.dgn, intrinsics.json, corr.cor, graph.json,
/// skinning.skn, gt_motion.json, scene_flow.bin, masks.bin and scene.json.
void save_scene(const SyntheticScene& scene, const fs::path& dir);

/// Reads a directory written by save_scene. Points are back-projected from
/// the stored f32 depths; surface parameters are not restored.
SyntheticScene load_scene(const fs::path& dir);

/// Reads a whole file.
std::vector<unsigned char> read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& content);

}  // namespace ntrack::io
