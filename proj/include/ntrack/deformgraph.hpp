#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ntrack/geometry.hpp"

namespace ntrack {

/// Triangle mesh over the valid pixels of a point image. Vertices are the
/// pixels referenced by at least one triangle, in ascending pixel order.
struct DepthMesh {
  struct Neighbor {
    int vertex;
    double length;
  };

  int width = 0;
  int height = 0;
  std::vector<std::array<std::size_t, 3>> triangles;  // pixel indices
  std::vector<std::size_t> vertex_pixels;
  std::vector<Vec3> positions;
  std::vector<std::vector<Neighbor>> adjacency;

  std::size_t vertex_count() const { return vertex_pixels.size(); }
  /// Vertex index for a pixel, or -1.
  int vertex_of_pixel(std::size_t pixel) const;
};

/// Nodes selected from mesh vertices.
struct NodeSample {
  std::vector<int> vertices;  // mesh vertex index per node
  std::vector<Vec3> positions;
};

struct DeformationGraph {
  std::vector<Vec3> nodes;
  std::vector<std::vector<int>> edges;  // directed, at most K per node
  std::vector<int> cluster_id;
  double sigma = 0.05;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t edge_count() const;
  int cluster_count() const;
  /// Throws kInvalidInput on size mismatches, self-loops, duplicates or
  /// out-of-range neighbors.
  void validate() const;
};

/// Per-pixel support: up to kSupport node indices (-1 when unused) and
/// normalized weights. Unsupported pixels have no node.
class SkinningTable {
 public:
  static constexpr int kSupport = 4;

  SkinningTable() = default;
  SkinningTable(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return supported_.size(); }

  bool supported(std::size_t pixel) const { return supported_[pixel] != 0; }
  const std::array<int, kSupport>& nodes(std::size_t pixel) const { return nodes_[pixel]; }
  const std::array<double, kSupport>& weights(std::size_t pixel) const {
    return weights_[pixel];
  }

  void set(std::size_t pixel, const std::array<int, kSupport>& nodes,
           const std::array<double, kSupport>& weights);
  void clear(std::size_t pixel);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::array<int, kSupport>> nodes_;
  std::vector<std::array<double, kSupport>> weights_;
  std::vector<std::uint8_t> supported_;
};

struct GraphOptions {
  double sigma = 0.05;
  int k_neighbors = 8;
  double edge_len_max = 0.05;
};

/// Two triangles per fully valid quad, split along the (x+1,y)-(x,y+1)
/// diagonal; a quad with one invalid corner keeps the triangle formed by
/// the other three. Triangles with an edge longer than edge_len_max are cut.
/// Throws kEmptyMesh when fewer than 3 pixels are valid.
DepthMesh build_depth_mesh(const PointImage& points, double edge_len_max);

/// Greedy covering in ascending pixel order: a vertex becomes a node when no
/// existing node lies within sigma of it.
NodeSample sample_nodes(const DepthMesh& mesh, double sigma);

/// K geodesically nearest other nodes per node, by Dijkstra over mesh edges
/// weighted by Euclidean length. Ties resolve to the lower node index.
std::vector<std::vector<int>> geodesic_edges(const DepthMesh& mesh,
                                             const std::vector<int>& node_vertices,
                                             int k);

/// Connected components of the undirected closure, labelled densely from 0
/// in order of first appearance.
std::vector<int> label_clusters(std::size_t node_count,
                                const std::vector<std::vector<int>>& edges);

/// Gaussian weights exp(-|v - p|^2 / (2 sigma^2)) over the kSupport nearest
/// nodes, normalized to one. Pixels whose nearest node is farther than
/// 2 sigma are left unsupported.
SkinningTable compute_skinning(const PointImage& points, const std::vector<Vec3>& nodes,
                               double sigma);

/// Mesh, nodes, edges and clusters in one step.
DeformationGraph build_graph(const PointImage& points, const GraphOptions& options);

}  // namespace ntrack
