// Independent oracles for graph construction, shared by the unit and
// acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "ntrack/deformgraph.hpp"

namespace testing {

using namespace ntrack;

inline PointImage grid_points(int w, int h, double spacing, double z = 1.0) {
  PointImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.set(img.index(x, y), Vec3(x * spacing, y * spacing, z));
  }
  return img;
}

// Wavy, jittered grid so that geodesic distances have no ties.
inline PointImage wavy_points(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.002, 0.002);
  PointImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double px = 0.01 * x + jitter(rng);
      const double py = 0.01 * y + jitter(rng);
      img.set(img.index(x, y), Vec3(px, py, 1.0 + 0.02 * std::sin(8 * px) * std::cos(5 * py)));
    }
  }
  return img;
}

// All-pairs geodesic K-NN computed from the triangle list alone, with a
// quadratic-time Dijkstra.
inline std::vector<std::set<int>> knn_oracle(const DepthMesh& mesh, const std::vector<int>& nodes, int k) {
  const std::size_t V = mesh.vertex_count();
  std::vector<std::map<int, double>> adj(V);
  for (const auto& t : mesh.triangles) {
    for (int a = 0; a < 3; ++a) {
      const int u = mesh.vertex_of_pixel(t[a]);
      const int v = mesh.vertex_of_pixel(t[(a + 1) % 3]);
      const double len = (mesh.positions[u] - mesh.positions[v]).norm();
      adj[u][v] = len;
      adj[v][u] = len;
    }
  }
  std::vector<std::set<int>> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::vector<double> dist(V, std::numeric_limits<double>::infinity());
    std::vector<char> done(V, 0);
    dist[nodes[i]] = 0.0;
    for (std::size_t it = 0; it < V; ++it) {
      int best = -1;
      for (std::size_t v = 0; v < V; ++v) {
        if (!done[v] && (best < 0 || dist[v] < dist[best])) best = static_cast<int>(v);
      }
      if (best < 0 || std::isinf(dist[best])) break;
      done[best] = 1;
      for (const auto& [v, len] : adj[best]) dist[v] = std::min(dist[v], dist[best] + len);
    }
    std::vector<std::pair<double, int>> cand;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (j != i && std::isfinite(dist[nodes[j]])) cand.push_back({dist[nodes[j]], static_cast<int>(j)});
    }
    std::sort(cand.begin(), cand.end());
    for (std::size_t c = 0; c < cand.size() && c < static_cast<std::size_t>(k); ++c) {
      out[i].insert(cand[c].second);
    }
  }
  return out;
}

inline std::vector<int> flood_fill_labels(std::size_t n, const std::vector<std::vector<int>>& edges) {
  std::vector<std::vector<int>> und(n);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (int j : edges[i]) {
      und[i].push_back(j);
      und[j].push_back(static_cast<int>(i));
    }
  }
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::queue<int> q;
    q.push(static_cast<int>(s));
    label[s] = next;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : und[u]) {
        if (label[v] < 0) {
          label[v] = next;
          q.push(v);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace testing
