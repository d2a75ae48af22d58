#include "ntrack/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ntrack/error.hpp"

namespace ntrack {

void SolverConfig::validate() const {
  if (max_iter < 1) throw Error(ErrorCode::kInvalidInput, "solver: max_iter must be >= 1");
  if (weights.lambda_2d < 0 || weights.lambda_depth < 0 || weights.lambda_reg < 0) {
    throw Error(ErrorCode::kInvalidInput, "solver: lambdas must be non-negative");
  }
  if (weights.lambda_2d == 0 && weights.lambda_depth == 0 && weights.lambda_reg == 0) {
    throw Error(ErrorCode::kInvalidInput, "solver: all lambdas are zero");
  }
  if (min_cluster_correspondences < 0 || damping < 0) {
    throw Error(ErrorCode::kInvalidInput, "solver: negative threshold or damping");
  }
}

namespace {

// Correspondence usable before any motion is known: valid, in range, with a
// valid and supported source pixel.
bool supported_entry(const TrackingProblem& p, const Correspondence& c, std::size_t& px) {
  if (!c.valid) return false;
  if (c.ux < 0 || c.uy < 0 || c.ux >= p.source.width() || c.uy >= p.source.height()) {
    return false;
  }
  px = p.source.index(c.ux, c.uy);
  return p.source.valid(px) && px < p.skin.size() && p.skin.supported(px);
}

}  // namespace

ClusterFilter filter_clusters(const TrackingProblem& problem, int min_count,
                              const std::vector<std::uint8_t>& mask) {
  const auto& entries = problem.correspondences.entries;
  const DeformationGraph& graph = problem.graph;
  const int clusters = graph.cluster_count();
  ClusterFilter out;
  out.active_nodes.assign(graph.node_count(), 1);
  out.correspondence_mask.assign(entries.size(), 1);
  if (!mask.empty()) {
    if (mask.size() != entries.size()) {
      throw Error(ErrorCode::kInvalidInput, "filter_clusters: mask size mismatch");
    }
    out.correspondence_mask = mask;
  }
  std::vector<std::uint8_t> cluster_alive(static_cast<std::size_t>(clusters), 1);

  bool changed = true;
  while (changed) {
    changed = false;
    out.cluster_counts.assign(static_cast<std::size_t>(clusters), 0);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      std::size_t px = 0;
      if (!out.correspondence_mask[k] || !supported_entry(problem, entries[k], px)) continue;
      std::array<int, SkinningTable::kSupport> touched;
      touched.fill(-1);
      int touched_count = 0;
      bool touches_dead = false;
      for (int node : problem.skin.nodes(px)) {
        if (node < 0) break;
        const int cl = graph.cluster_id[node];
        if (!cluster_alive[cl]) touches_dead = true;
        if (std::find(touched.begin(), touched.end(), cl) == touched.end()) {
          touched[touched_count++] = cl;
        }
      }
      if (touches_dead) {
        out.correspondence_mask[k] = 0;
        continue;
      }
      for (int t = 0; t < touched_count; ++t) ++out.cluster_counts[touched[t]];
    }
    for (int cl = 0; cl < clusters; ++cl) {
      if (cluster_alive[cl] && out.cluster_counts[cl] < min_count) {
        cluster_alive[cl] = 0;
        out.dropped_clusters.push_back(cl);
        changed = true;
      }
    }
  }
  bool any = false;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    out.active_nodes[i] = cluster_alive[graph.cluster_id[i]];
    any = any || out.active_nodes[i];
  }
  if (!any) {
    throw Error(ErrorCode::kUnderdetermined,
                "filter_clusters: every cluster has fewer than " + std::to_string(min_count) +
                    " correspondences");
  }
  return out;
}

std::vector<std::uint8_t> subsample_correspondences(const CorrespondenceSet& set,
                                                    std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> valid;
  for (std::size_t k = 0; k < set.entries.size(); ++k) {
    if (set.entries[k].valid) valid.push_back(k);
  }
  std::vector<std::uint8_t> mask(set.entries.size(), 0);
  if (count >= valid.size()) {
    for (std::size_t k : valid) mask[k] = 1;
    return mask;
  }
  // Partial Fisher-Yates on raw engine output; std::shuffle and the
  // distributions are not portable across standard libraries.
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t span = valid.size() - k;
    const std::size_t j = k + static_cast<std::size_t>(rng() % span);
    std::swap(valid[k], valid[j]);
    mask[valid[k]] = 1;
  }
  return mask;
}

namespace {

[[noreturn]] void throw_singular(const Eigen::MatrixXd& A, const ResidualSystem& sys,
                                 const DeformationGraph& graph, int iteration) {
  std::vector<std::vector<int>> cols_of_cluster(static_cast<std::size_t>(graph.cluster_count()));
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (sys.node_column[i] >= 0) cols_of_cluster[graph.cluster_id[i]].push_back(sys.node_column[i]);
  }
  for (std::size_t cl = 0; cl < cols_of_cluster.size(); ++cl) {
    const auto& blocks = cols_of_cluster[cl];
    if (blocks.empty()) continue;
    const auto m = static_cast<Eigen::Index>(6 * blocks.size());
    Eigen::MatrixXd sub(m, m);
    for (std::size_t a = 0; a < blocks.size(); ++a) {
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        sub.block<6, 6>(6 * a, 6 * b) = A.block<6, 6>(6 * blocks[a], 6 * blocks[b]);
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sub);
    if (!(lu.rcond() >= kSingularRcond)) {
      throw Error(ErrorCode::kSingularSystem,
                  "singular normal equations in cluster " + std::to_string(cl) +
                      " at iteration " + std::to_string(iteration));
    }
  }
  throw Error(ErrorCode::kSingularSystem,
              "singular normal equations at iteration " + std::to_string(iteration) +
                  " (coupled clusters)");
}

}  // namespace

SolveResult gauss_newton_solve(const TrackingProblem& problem, const SolverConfig& config) {
  config.validate();
  problem.camera.validate();
  const DeformationGraph& graph = problem.graph;

  std::vector<std::uint8_t> pre_mask;
  if (config.correspondence_subsample) {
    pre_mask = subsample_correspondences(problem.correspondences,
                                         *config.correspondence_subsample, config.seed);
  }
  const ClusterFilter filter =
      filter_clusters(problem, config.min_cluster_correspondences, pre_mask);

  SolveResult result;
  result.dropped_clusters = filter.dropped_clusters;
  result.active_nodes = filter.active_nodes;
  result.correspondence_mask = filter.correspondence_mask;

  AssembleOptions opts;
  opts.weights = config.weights;
  opts.active = filter.active_nodes;
  opts.correspondence_mask = filter.correspondence_mask;
  opts.require_data = config.min_cluster_correspondences > 0;
  result.tape.assemble_options = opts;
  result.tape.damping = config.damping;

  GraphMotion motion(graph.node_count());
  for (int n = 0; n < config.max_iter; ++n) {
    TapeEntry entry;
    entry.motion = motion;
    entry.system = assemble(problem, motion, opts);
    const ResidualSystem& sys = entry.system;
    result.residual_norms.push_back(std::sqrt(sys.squared_norm()));
    result.usable_correspondences = sys.data.size();

    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    sys.normal_equations(A, b, config.damping);
    entry.lu.compute(A);
    if (!(entry.lu.rcond() >= kSingularRcond)) throw_singular(A, sys, graph, n);
    entry.solution = entry.lu.solve(b);
    if (!entry.solution.allFinite()) {
      throw Error(ErrorCode::kDivergence,
                  "non-finite increment at iteration " + std::to_string(n));
    }
    entry.delta = MotionDelta(graph.node_count());
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      const int c = sys.node_column[i];
      if (c < 0) continue;
      entry.delta.rotation[i] = entry.solution.segment<3>(6 * c);
      entry.delta.translation[i] = entry.solution.segment<3>(6 * c + 3);
    }
    motion = apply_increment(motion, entry.delta);
    if (!motion.finite()) {
      throw Error(ErrorCode::kDivergence, "non-finite motion at iteration " + std::to_string(n));
    }
    result.increments.push_back(entry.delta);
    result.tape.entries.push_back(std::move(entry));
  }
  result.motion = motion;
  try {
    AssembleOptions final_opts = opts;
    final_opts.require_data = false;
    result.final_residual_norm = std::sqrt(assemble(problem, motion, final_opts).squared_norm());
  } catch (const Error&) {
    result.final_residual_norm = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

Metrics evaluate_metrics(const PointImage& source, const DeformationGraph& graph,
                         const SkinningTable& skin, const GraphMotion& motion,
                         const SceneFlow& flow, const std::vector<Vec3>& gt_translations,
                         const std::vector<std::uint8_t>& node_mask,
                         const std::vector<std::uint8_t>& active_nodes) {
  Metrics m;
  double epe = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!source.valid(i) || i >= skin.size() || !skin.supported(i)) continue;
    if (i >= flow.valid.size() || !flow.valid[i]) continue;
    const Vec3 q = warp_point(source.point(i), graph, skin.nodes(i), skin.weights(i), motion);
    epe += (q - (source.point(i) + flow.flow[i])).norm();
    ++m.pixels;
  }
  double gerr = 0.0;
  for (std::size_t i = 0; i < graph.node_count() && i < gt_translations.size(); ++i) {
    if (!node_mask.empty() && !node_mask[i]) continue;
    if (!active_nodes.empty() && !active_nodes[i]) continue;
    gerr += (motion.translations[i] - gt_translations[i]).norm();
    ++m.nodes;
  }
  m.epe3d = m.pixels ? epe / static_cast<double>(m.pixels) : 0.0;
  m.graph_error3d = m.nodes ? gerr / static_cast<double>(m.nodes) : 0.0;
  return m;
}

}  // namespace ntrack
