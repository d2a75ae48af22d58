#include "ntrack/deformgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>

#include "ntrack/error.hpp"

namespace ntrack {

int DepthMesh::vertex_of_pixel(std::size_t pixel) const {
  const auto it = std::lower_bound(vertex_pixels.begin(), vertex_pixels.end(), pixel);
  if (it == vertex_pixels.end() || *it != pixel) return -1;
  return static_cast<int>(it - vertex_pixels.begin());
}

std::size_t DeformationGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

int DeformationGraph::cluster_count() const {
  int m = -1;
  for (int c : cluster_id) m = std::max(m, c);
  return m + 1;
}

void DeformationGraph::validate() const {
  const auto n = static_cast<int>(nodes.size());
  if (edges.size() != nodes.size() || cluster_id.size() != nodes.size()) {
    throw Error(ErrorCode::kInvalidInput, "graph: nodes/edges/clusters size mismatch");
  }
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidInput, "graph: sigma must be positive");
  for (int i = 0; i < n; ++i) {
    std::set<int> seen;
    for (int j : edges[i]) {
      if (j < 0 || j >= n) throw Error(ErrorCode::kInvalidInput, "graph: neighbor out of range");
      if (j == i) throw Error(ErrorCode::kInvalidInput, "graph: self-loop at node " + std::to_string(i));
      if (!seen.insert(j).second) {
        throw Error(ErrorCode::kInvalidInput, "graph: duplicate edge at node " + std::to_string(i));
      }
    }
    if (cluster_id[i] < 0) throw Error(ErrorCode::kInvalidInput, "graph: negative cluster id");
  }
}

SkinningTable::SkinningTable(int width, int height) : width_(width), height_(height) {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::array<int, kSupport> none;
  none.fill(-1);
  nodes_.assign(n, none);
  weights_.assign(n, std::array<double, kSupport>{});
  supported_.assign(n, 0);
}

void SkinningTable::set(std::size_t pixel, const std::array<int, kSupport>& nodes,
                        const std::array<double, kSupport>& weights) {
  nodes_[pixel] = nodes;
  weights_[pixel] = weights;
  supported_[pixel] = 1;
}

void SkinningTable::clear(std::size_t pixel) {
  nodes_[pixel].fill(-1);
  weights_[pixel].fill(0.0);
  supported_[pixel] = 0;
}

DepthMesh build_depth_mesh(const PointImage& points, double edge_len_max) {
  if (points.valid_count() < 3) {
    throw Error(ErrorCode::kEmptyMesh, "depth mesh needs at least 3 valid pixels");
  }
  DepthMesh mesh;
  mesh.width = points.width();
  mesh.height = points.height();
  const double max2 = edge_len_max * edge_len_max;

  auto short_enough = [&](std::size_t a, std::size_t b) {
    return (points.point(a) - points.point(b)).squaredNorm() <= max2;
  };
  auto try_add = [&](std::size_t a, std::size_t b, std::size_t c) {
    if (!points.valid(a) || !points.valid(b) || !points.valid(c)) return;
    if (short_enough(a, b) && short_enough(b, c) && short_enough(a, c)) {
      mesh.triangles.push_back({a, b, c});
    }
  };

  for (int y = 0; y + 1 < points.height(); ++y) {
    for (int x = 0; x + 1 < points.width(); ++x) {
      const std::size_t a = points.index(x, y);
      const std::size_t b = points.index(x + 1, y);
      const std::size_t c = points.index(x, y + 1);
      const std::size_t d = points.index(x + 1, y + 1);
      if (points.valid(b) && points.valid(c)) {
        try_add(a, b, c);
        try_add(b, d, c);
      } else {
        // b-c diagonal unusable; the a-d split keeps whichever side is valid.
        try_add(a, b, d);
        try_add(a, d, c);
      }
    }
  }

  std::vector<std::size_t> used;
  used.reserve(mesh.triangles.size() * 3);
  for (const auto& t : mesh.triangles) used.insert(used.end(), t.begin(), t.end());
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  mesh.vertex_pixels = std::move(used);
  mesh.positions.reserve(mesh.vertex_pixels.size());
  for (std::size_t p : mesh.vertex_pixels) mesh.positions.push_back(points.point(p));

  mesh.adjacency.assign(mesh.vertex_pixels.size(), {});
  auto link = [&](int u, int v) {
    auto& nu = mesh.adjacency[u];
    for (const auto& n : nu) {
      if (n.vertex == v) return;
    }
    const double len = (mesh.positions[u] - mesh.positions[v]).norm();
    nu.push_back({v, len});
    mesh.adjacency[v].push_back({u, len});
  };
  for (const auto& t : mesh.triangles) {
    const int a = mesh.vertex_of_pixel(t[0]);
    const int b = mesh.vertex_of_pixel(t[1]);
    const int c = mesh.vertex_of_pixel(t[2]);
    link(a, b);
    link(b, c);
    link(a, c);
  }
  return mesh;
}

namespace {

// Uniform hash grid for radius queries.
class SpatialHash {
 public:
  explicit SpatialHash(double cell) : cell_(cell) {}

  void insert(const Vec3& p, int id) { cells_[key(cell_of(p))].push_back({p, id}); }

  template <typename Fn>
  void for_each_near(const Vec3& p, Fn&& fn) const {
    const auto c = cell_of(p);
    for (long dz = -1; dz <= 1; ++dz) {
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (const auto& e : it->second) fn(e.first, e.second);
        }
      }
    }
  }

 private:
  std::array<long, 3> cell_of(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x() / cell_)),
            static_cast<long>(std::floor(p.y() / cell_)),
            static_cast<long>(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    const auto h = [](long v) { return static_cast<std::uint64_t>(v) & 0x1FFFFFu; };
    return (h(c[0]) << 42) | (h(c[1]) << 21) | h(c[2]);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::pair<Vec3, int>>> cells_;
};

}  // namespace

NodeSample sample_nodes(const DepthMesh& mesh, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidInput, "sample_nodes: sigma must be positive");
  NodeSample out;
  SpatialHash hash(sigma);
  const double s2 = sigma * sigma;
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const Vec3& p = mesh.positions[v];
    bool covered = false;
    hash.for_each_near(p, [&](const Vec3& q, int) {
      if (!covered && (p - q).squaredNorm() <= s2) covered = true;
    });
    if (covered) continue;
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(static_cast<int>(v));
    out.positions.push_back(p);
    hash.insert(p, id);
  }
  return out;
}

std::vector<std::vector<int>> geodesic_edges(const DepthMesh& mesh,
                                             const std::vector<int>& node_vertices,
                                             int k) {
  const std::size_t n = node_vertices.size();
  std::vector<std::vector<int>> edges(n);
  if (k <= 0) return edges;

  std::vector<int> node_at(mesh.vertex_count(), -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = node_vertices[i];
    if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertex_count()) {
      throw Error(ErrorCode::kInvalidInput, "geodesic_edges: node is not a mesh vertex");
    }
    node_at[v] = static_cast<int>(i);
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(mesh.vertex_count(), kInf);
  std::vector<int> touched;
  using Item = std::pair<double, int>;

  for (std::size_t i = 0; i < n; ++i) {
    for (int v : touched) dist[v] = kInf;
    touched.clear();
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    const int src = node_vertices[i];
    dist[src] = 0.0;
    touched.push_back(src);
    queue.push({0.0, src});

    // Settle until the K-th found node's distance is exceeded so that equal
    // distances can be ordered by node index.
    std::vector<std::pair<double, int>> found;
    double cutoff = kInf;
    while (!queue.empty()) {
      const auto [d, v] = queue.top();
      queue.pop();
      if (d > dist[v]) continue;
      if (d > cutoff) break;
      const int node = node_at[v];
      if (node >= 0 && node != static_cast<int>(i)) {
        found.push_back({d, node});
        if (static_cast<int>(found.size()) == k) cutoff = d;
      }
      for (const auto& nb : mesh.adjacency[v]) {
        const double nd = d + nb.length;
        if (nd < dist[nb.vertex]) {
          if (dist[nb.vertex] == kInf) touched.push_back(nb.vertex);
          dist[nb.vertex] = nd;
          queue.push({nd, nb.vertex});
        }
      }
    }
    std::sort(found.begin(), found.end());
    if (static_cast<int>(found.size()) > k) found.resize(static_cast<std::size_t>(k));
    edges[i].reserve(found.size());
    for (const auto& f : found) edges[i].push_back(f.second);
  }
  return edges;
}

std::vector<int> label_clusters(std::size_t node_count,
                                const std::vector<std::vector<int>>& edges) {
  std::vector<int> parent(node_count);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t i = 0; i < edges.size() && i < node_count; ++i) {
    for (int j : edges[i]) {
      const int a = find(static_cast<int>(i));
      const int b = find(j);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<int> label(node_count, -1);
  std::unordered_map<int, int> dense;
  for (std::size_t i = 0; i < node_count; ++i) {
    const int root = find(static_cast<int>(i));
    const auto [it, inserted] = dense.emplace(root, static_cast<int>(dense.size()));
    label[i] = it->second;
  }
  return label;
}

SkinningTable compute_skinning(const PointImage& points, const std::vector<Vec3>& nodes,
                               double sigma) {
  if (nodes.empty()) throw Error(ErrorCode::kInvalidInput, "compute_skinning: no nodes");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kInvalidInput, "compute_skinning: sigma must be positive");
  constexpr int M = SkinningTable::kSupport;
  SkinningTable table(points.width(), points.height());
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double support2 = 4.0 * sigma * sigma;
  std::vector<std::pair<double, int>> dist(nodes.size());

  for (std::size_t px = 0; px < points.size(); ++px) {
    if (!points.valid(px)) continue;
    const Vec3& p = points.point(px);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      dist[i] = {(nodes[i] - p).squaredNorm(), static_cast<int>(i)};
    }
    const std::size_t m = std::min<std::size_t>(M, nodes.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(m), dist.end());
    if (dist[0].first > support2) continue;

    std::array<int, M> idx;
    idx.fill(-1);
    std::array<double, M> w{};
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      idx[k] = dist[k].second;
      w[k] = std::exp(-dist[k].first * inv2s2);
      total += w[k];
    }
    for (std::size_t k = 0; k < m; ++k) w[k] /= total;
    table.set(px, idx, w);
  }
  return table;
}

DeformationGraph build_graph(const PointImage& points, const GraphOptions& options) {
  const DepthMesh mesh = build_depth_mesh(points, options.edge_len_max);
  if (mesh.vertex_count() == 0) {
    throw Error(ErrorCode::kEmptyMesh, "depth mesh has no triangles");
  }
  const NodeSample sample = sample_nodes(mesh, options.sigma);
  DeformationGraph graph;
  graph.nodes = sample.positions;
  graph.edges = geodesic_edges(mesh, sample.vertices, options.k_neighbors);
  graph.cluster_id = label_clusters(graph.nodes.size(), graph.edges);
  graph.sigma = options.sigma;
  return graph;
}

}  // namespace ntrack
