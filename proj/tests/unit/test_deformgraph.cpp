#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>

#include "ntrack/deformgraph.hpp"
#include "ntrack/error.hpp"
#include "ntrack/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ntrack;

using testing::flood_fill_labels;
using testing::grid_points;
using testing::knn_oracle;
using testing::wavy_points;

TEST_SUITE("deformgraph") {

TEST_CASE("depth mesh triangles") {
  SUBCASE("full quad") {
    CHECK(build_depth_mesh(grid_points(2, 2, 0.01), 0.05).triangles.size() == 2);
  }
  SUBCASE("one invalid corner") {
    for (std::size_t corner = 0; corner < 4; ++corner) {
      PointImage p = grid_points(2, 2, 0.01);
      p.invalidate(corner);
      const DepthMesh m = build_depth_mesh(p, 0.05);
      CHECK(m.triangles.size() == 1);
      for (std::size_t v : m.triangles.front()) CHECK(v != corner);
    }
  }
  SUBCASE("depth discontinuity") {
    PointImage p = grid_points(2, 2, 0.01);
    p.set(p.index(1, 0), Vec3(0.01, 0, 1.2));
    p.set(p.index(1, 1), Vec3(0.01, 0.01, 1.2));
    CHECK(build_depth_mesh(p, 0.05).triangles.empty());
  }
  SUBCASE("too few valid pixels") {
    PointImage p = grid_points(2, 2, 0.01);
    p.invalidate(0);
    p.invalidate(3);
    CHECK_THROWS_AS(build_depth_mesh(p, 0.05), Error);
    try {
      build_depth_mesh(p, 0.05);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptyMesh);
    }
  }
  SUBCASE("vertices in pixel order") {
    const DepthMesh m = build_depth_mesh(grid_points(4, 3, 0.01), 0.05);
    CHECK(m.vertex_count() == 12);
    CHECK(std::is_sorted(m.vertex_pixels.begin(), m.vertex_pixels.end()));
    CHECK(m.triangles.size() == 2 * 3 * 2);
  }
}

TEST_CASE("node sampling") {
  SUBCASE("one node covers a small patch") {
    const DepthMesh m = build_depth_mesh(grid_points(3, 3, 0.01), 0.05);
    const NodeSample s = sample_nodes(m, 0.05);
    CHECK(s.vertices.size() == 1);
    CHECK(s.vertices.front() == 0);
  }
  SUBCASE("two distant clusters each get a node") {
    PointImage p(8, 2);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 8; ++x) {
        const double off = x < 4 ? 0.0 : 1.0;
        p.set(p.index(x, y), Vec3(off + 0.01 * x, 0.01 * y, 1.0));
      }
    }
    const DepthMesh m = build_depth_mesh(p, 0.05);
    const NodeSample s = sample_nodes(m, 0.05);
    bool left = false, right = false;
    for (const Vec3& v : s.positions) (v.x() < 0.5 ? left : right) = true;
    CHECK(left);
    CHECK(right);
  }
  SUBCASE("exhaustive coverage of a 0.3 m patch") {
    const DepthMesh m = build_depth_mesh(grid_points(61, 61, 0.005), 0.05);
    const NodeSample s = sample_nodes(m, 0.05);
    double worst = 0.0;
    for (const Vec3& v : m.positions) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& n : s.positions) best = std::min(best, (v - n).norm());
      worst = std::max(worst, best);
    }
    CHECK(worst <= 0.05);
    CHECK(s.positions.size() > 1);
  }
}

TEST_CASE("geodesic edges") {
  SUBCASE("three collinear nodes on a strip") {
    const DepthMesh m = build_depth_mesh(grid_points(9, 2, 0.01), 0.05);
    const std::vector<int> nodes{m.vertex_of_pixel(0), m.vertex_of_pixel(4), m.vertex_of_pixel(8)};
    const auto e = geodesic_edges(m, nodes, 2);
    CHECK(std::set<int>(e[1].begin(), e[1].end()) == std::set<int>{0, 2});
    CHECK(e[0].size() == 2);
    CHECK(e[0].front() == 1);  // nearest first
  }
  SUBCASE("matches an all-pairs Dijkstra oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      PointImage p = wavy_points(20, 20, seed);
      std::mt19937_64 rng(seed);
      for (int i = 0; i < 15; ++i) p.invalidate(rng() % p.size());
      const DepthMesh m = build_depth_mesh(p, 0.05);
      std::vector<int> all(m.vertex_count());
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), rng);
      const std::size_t count = seed == 3 ? 200 : 50;
      const std::vector<int> nodes(all.begin(), all.begin() + static_cast<long>(count));
      const auto got = geodesic_edges(m, nodes, 8);
      const auto expected = knn_oracle(m, nodes, 8);
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        CHECK(std::set<int>(got[i].begin(), got[i].end()) == expected[i]);
        CHECK(got[i].size() == expected[i].size());
      }
    }
  }
  SUBCASE("no edges across components") {
    PointImage p = wavy_points(12, 6, 4);
    for (int y = 0; y < 6; ++y) p.invalidate(p.index(6, y));
    const DepthMesh m = build_depth_mesh(p, 0.05);
    std::vector<int> nodes;
    for (int x : {0, 2, 4, 8, 10}) nodes.push_back(m.vertex_of_pixel(p.index(x, 3)));
    const auto e = geodesic_edges(m, nodes, 8);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (int j : e[i]) CHECK((i < 3) == (j < 3));
    }
    CHECK(e[0].size() == 2);
    CHECK(e[3].size() == 1);
  }
  SUBCASE("permutation of the node list relabels the edges") {
    const PointImage p = wavy_points(15, 15, 9);
    const DepthMesh m = build_depth_mesh(p, 0.05);
    std::mt19937_64 rng(9);
    std::vector<int> all(m.vertex_count());
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> nodes(all.begin(), all.begin() + 40);
    std::vector<int> perm(nodes.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> permuted(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) permuted[perm[i]] = nodes[i];
    const auto a = geodesic_edges(m, nodes, 6);
    const auto b = geodesic_edges(m, permuted, 6);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::set<int> mapped;
      for (int j : a[i]) mapped.insert(perm[j]);
      CHECK(mapped == std::set<int>(b[perm[i]].begin(), b[perm[i]].end()));
    }
  }
}

TEST_CASE("cluster labels") {
  CHECK(label_clusters(3, {{1, 2}, {0}, {0}}) == std::vector<int>{0, 0, 0});
  const auto two = label_clusters(5, {{1}, {2}, {}, {4}, {}});
  CHECK(two[0] == two[1]);
  CHECK(two[1] == two[2]);
  CHECK(two[3] == two[4]);
  CHECK(two[0] != two[3]);
  CHECK(label_clusters(4, {}) == std::vector<int>{0, 1, 2, 3});

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<std::vector<int>> edges(n);
    const std::size_t m = rng() % (n + 1);
    for (std::size_t e = 0; e < m; ++e) {
      const int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
      if (a != b) edges[a].push_back(b);
    }
    CHECK(label_clusters(n, edges) == flood_fill_labels(n, edges));
  }
}

TEST_CASE("skinning weights") {
  PointImage p(1, 1);
  p.set(0, Vec3(0, 0, 1));
  SUBCASE("single node") {
    const SkinningTable t = compute_skinning(p, {Vec3(0.03, 0, 1)}, 0.05);
    REQUIRE(t.supported(0));
    CHECK(t.nodes(0)[0] == 0);
    CHECK(t.weights(0)[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.nodes(0)[1] == -1);
  }
  SUBCASE("equidistant pair") {
    const SkinningTable t = compute_skinning(p, {Vec3(0.02, 0, 1), Vec3(-0.02, 0, 1)}, 0.05);
    CHECK(t.weights(0)[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(t.weights(0)[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("distances sigma and two sigma") {
    const double s = 0.05;
    const SkinningTable t = compute_skinning(p, {Vec3(s, 0, 1), Vec3(0, -2 * s, 1)}, s);
    const double a = std::exp(-0.5), b = std::exp(-2.0);
    CHECK(t.nodes(0)[0] == 0);
    CHECK(t.weights(0)[0] == doctest::Approx(a / (a + b)).epsilon(1e-12));
    CHECK(t.weights(0)[1] == doctest::Approx(b / (a + b)).epsilon(1e-12));
    CHECK(t.weights(0)[0] == doctest::Approx(0.8176).epsilon(1e-4));
  }
  SUBCASE("beyond two sigma is unsupported") {
    const SkinningTable t = compute_skinning(p, {Vec3(0.1001, 0, 1)}, 0.05);
    CHECK_FALSE(t.supported(0));
  }
  SUBCASE("at most four nearest nodes") {
    std::vector<Vec3> nodes;
    for (int i = 0; i < 7; ++i) nodes.push_back(Vec3(0.01 * (i + 1), 0, 1));
    const SkinningTable t = compute_skinning(p, nodes, 0.05);
    CHECK(t.nodes(0) == std::array<int, 4>{0, 1, 2, 3});
  }
}

TEST_CASE("graph invariants on generated scenes") {
  for (SceneKind kind : {SceneKind::kRigid, SceneKind::kArticulatedBend, SceneKind::kSmoothSine,
                         SceneKind::kTwoCluster}) {
    const SyntheticScene s = generate_scene(kind, 96, 72, 3);
    const DeformationGraph& g = s.graph;
    CHECK_NOTHROW(g.validate());
    std::vector<int> cluster_size(g.cluster_count(), 0);
    for (int c : g.cluster_id) ++cluster_size[c];
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      CHECK(g.edges[i].size() <= 8);
      if (cluster_size[g.cluster_id[i]] > 1) CHECK(!g.edges[i].empty());
      std::set<int> seen(g.edges[i].begin(), g.edges[i].end());
      CHECK(seen.size() == g.edges[i].size());
      CHECK(seen.count(static_cast<int>(i)) == 0);
    }
    if (kind == SceneKind::kTwoCluster) CHECK(g.cluster_count() == 2);
    else CHECK(g.cluster_count() == 1);

    for (std::size_t px = 0; px < s.source.size(); ++px) {
      if (!s.source.valid(px)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& n : g.nodes) best = std::min(best, (n - s.source.point(px)).norm());
      CHECK(best <= g.sigma);
      REQUIRE(s.skin.supported(px));
      double sum = 0.0;
      for (double w : s.skin.weights(px)) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("graph validation rejects malformed graphs") {
  DeformationGraph g;
  g.nodes = {Vec3(0, 0, 1), Vec3(0.1, 0, 1)};
  g.edges = {{1}, {0}};
  g.cluster_id = {0, 0};
  CHECK_NOTHROW(g.validate());
  g.edges = {{0}, {0}};
  CHECK_THROWS_AS(g.validate(), Error);
  g.edges = {{1, 1}, {0}};
  CHECK_THROWS_AS(g.validate(), Error);
  g.edges = {{2}, {0}};
  CHECK_THROWS_AS(g.validate(), Error);
  g.edges = {{1}};
  CHECK_THROWS_AS(g.validate(), Error);
}

}  // TEST_SUITE
