#include "ntrack/ntrack.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ntrack/deformgraph.hpp"
#include "ntrack/error.hpp"
#include "ntrack/io.hpp"
#include "ntrack/solver.hpp"
#include "ntrack/synth.hpp"
#include "ntrack/tracker.hpp"
#include "ntrack/weights.hpp"

struct nt_scene {
  ntrack::SyntheticScene scene;
};

struct nt_motion {
  ntrack::GraphMotion motion;
  double final_residual = 0.0;
};

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

thread_local std::string g_last_error;

nt_status fail(nt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs body, translating exceptions into status codes.
template <class F>
nt_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return NT_OK;
  } catch (const ntrack::Error& e) {
    return fail(static_cast<nt_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(NT_INTERNAL, "out of memory");
  } catch (const json::exception& e) {
    return fail(NT_INVALID_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(NT_INTERNAL, e.what());
  } catch (...) {
    return fail(NT_INTERNAL, "unknown exception");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw ntrack::Error(ntrack::ErrorCode::kInvalidInput, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

ntrack::SolverConfig make_config(const nt_solver_options* o,
                                 const ntrack::CorrespondenceSet& set) {
  nt_solver_options d;
  nt_solver_options_default(&d);
  if (!o) o = &d;
  ntrack::SolverConfig c;
  c.max_iter = o->max_iter;
  c.weights.lambda_2d = o->lambda_2d;
  c.weights.lambda_depth = o->lambda_depth;
  c.weights.lambda_reg = o->lambda_reg;
  c.damping = o->damping;
  c.seed = o->seed;
  if (o->subsample > 0) c.correspondence_subsample = static_cast<std::size_t>(o->subsample);
  if (o->min_cluster_correspondences >= 0) {
    require(o->min_cluster_correspondences <= INT32_MAX, "min_cluster_correspondences too large");
    c.min_cluster_correspondences = static_cast<int>(o->min_cluster_correspondences);
  } else {
    std::size_t n = set.valid_count();
    if (c.correspondence_subsample) n = std::min(n, *c.correspondence_subsample);
    c.min_cluster_correspondences =
        static_cast<int>(std::min<std::size_t>(2000, (2000 * n + 5000) / 10000));
  }
  c.validate();
  return c;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string frame_name(const char* prefix, int f, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04d%s", prefix, f, ext);
  return buf;
}

std::string pair_name(char a, int x, char b, int y) {
  return std::string(1, a) + std::to_string(x) + "_" + std::string(1, b) + std::to_string(y) +
         ".cor";
}

class FileProvider : public ntrack::CorrespondenceProvider {
 public:
  explicit FileProvider(fs::path dir) : dir_(std::move(dir)) {}
  ntrack::CorrespondenceSet forward(int keyframe, int frame) override {
    return ntrack::io::read_correspondences(dir_ / pair_name('k', keyframe, 'f', frame));
  }
  ntrack::CorrespondenceSet backward(int frame, int keyframe) override {
    return ntrack::io::read_correspondences(dir_ / pair_name('f', frame, 'k', keyframe));
  }

 private:
  fs::path dir_;
};

void read_policy(const json& j, ntrack::KeyframePolicy& policy, nt_solver_options& solver,
                 std::optional<ntrack::GraphOptions>& graph) {
  require(j.is_object(), "policy: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "keyframe_interval") policy.keyframe_interval = value.get<int>();
    else if (key == "weight_threshold") policy.weight_threshold = value.get<double>();
    else if (key == "min_valid_fraction") policy.min_valid_fraction = value.get<double>();
    else if (key == "bidir_threshold") policy.bidir_threshold = value.get<double>();
    else if (key == "multikf_threshold") policy.multikf_threshold = value.get<double>();
    else if (key == "soft_bidirectional") policy.soft_bidirectional = value.get<bool>();
    else if (key == "soft_tau") policy.soft_tau = value.get<double>();
    else if (key == "solver") {
      for (const auto& [k, v] : value.items()) {
        if (k == "max_iter") solver.max_iter = v.get<int>();
        else if (k == "lambda_2d") solver.lambda_2d = v.get<double>();
        else if (k == "lambda_depth") solver.lambda_depth = v.get<double>();
        else if (k == "lambda_reg") solver.lambda_reg = v.get<double>();
        else if (k == "min_cluster_correspondences")
          solver.min_cluster_correspondences = v.get<std::int64_t>();
        else if (k == "damping") solver.damping = v.get<double>();
        else throw ntrack::Error(ntrack::ErrorCode::kInvalidInput, "policy: unknown solver key '" + k + "'");
      }
    } else if (key == "graph") {
      ntrack::GraphOptions g;
      for (const auto& [k, v] : value.items()) {
        if (k == "sigma") g.sigma = v.get<double>();
        else if (k == "k_neighbors") g.k_neighbors = v.get<int>();
        else if (k == "edge_len_max") g.edge_len_max = v.get<double>();
        else throw ntrack::Error(ntrack::ErrorCode::kInvalidInput, "policy: unknown graph key '" + k + "'");
      }
      graph = g;
    } else {
      throw ntrack::Error(ntrack::ErrorCode::kInvalidInput, "policy: unknown key '" + key + "'");
    }
  }
}

}  // namespace

extern "C" {

const char* nt_last_error(void) { return g_last_error.c_str(); }

const char* nt_status_string(nt_status status) {
  if (status == NT_OK) return "ok";
  if (status == NT_INTERNAL) return "internal error";
  if (status >= NT_INVALID_INPUT && status <= NT_GENERATION) {
    return ntrack::to_string(static_cast<ntrack::ErrorCode>(status));
  }
  return "unknown status";
}

void nt_string_free(char* s) { std::free(s); }

void nt_solver_options_default(nt_solver_options* o) {
  if (!o) return;
  const ntrack::SolverConfig c;
  o->max_iter = c.max_iter;
  o->lambda_2d = c.weights.lambda_2d;
  o->lambda_depth = c.weights.lambda_depth;
  o->lambda_reg = c.weights.lambda_reg;
  o->min_cluster_correspondences = c.min_cluster_correspondences;
  o->damping = c.damping;
  o->subsample = 0;
  o->seed = c.seed;
}

nt_status nt_scene_generate(const char* kind, int width, int height, uint64_t seed,
                            nt_scene** out) {
  return guarded([&] {
    require(kind && out, "nt_scene_generate: null argument");
    *out = nullptr;
    auto s = std::make_unique<nt_scene>();
    s->scene = ntrack::generate_scene(ntrack::scene_kind_from_string(kind), width, height, seed);
    *out = s.release();
  });
}

nt_status nt_scene_load(const char* dir, nt_scene** out) {
  return guarded([&] {
    require(dir && out, "nt_scene_load: null argument");
    *out = nullptr;
    auto s = std::make_unique<nt_scene>();
    s->scene = ntrack::io::load_scene(dir);
    *out = s.release();
  });
}

nt_status nt_scene_save(const nt_scene* scene, const char* dir) {
  return guarded([&] {
    require(scene && dir, "nt_scene_save: null argument");
    ntrack::io::save_scene(scene->scene, dir);
  });
}

nt_status nt_scene_add_noise(nt_scene* scene, double corr_sigma_px, double depth_sigma_m,
                             uint64_t seed) {
  return guarded([&] {
    require(scene, "nt_scene_add_noise: null scene");
    scene->scene = ntrack::add_noise(scene->scene, corr_sigma_px, depth_sigma_m, seed);
  });
}

nt_status nt_scene_size(const nt_scene* scene, int* width, int* height, uint64_t* nodes,
                        uint64_t* correspondences) {
  return guarded([&] {
    require(scene, "nt_scene_size: null scene");
    if (width) *width = scene->scene.width;
    if (height) *height = scene->scene.height;
    if (nodes) *nodes = scene->scene.graph.node_count();
    if (correspondences) *correspondences = scene->scene.correspondences.size();
  });
}

void nt_scene_free(nt_scene* scene) { delete scene; }

nt_status nt_solve_files(const char* source_depth, const char* target_depth,
                         const char* intrinsics, const char* correspondences, const char* graph,
                         double sigma, const nt_solver_options* options, nt_motion** out) {
  return guarded([&] {
    require(source_depth && target_depth && intrinsics && correspondences && graph && out,
            "nt_solve_files: null argument");
    *out = nullptr;
    const ntrack::CameraIntrinsics camera = ntrack::io::read_intrinsics(intrinsics);
    camera.validate();
    const ntrack::DepthImage sd = ntrack::io::read_depth(source_depth);
    const ntrack::DepthImage td = ntrack::io::read_depth(target_depth);
    require(sd.width() == td.width() && sd.height() == td.height(),
            "nt_solve_files: source and target sizes differ");
    const auto source = ntrack::PointImage::from_depth(sd, camera);
    const auto target = ntrack::PointImage::from_depth(td, camera);
    const ntrack::CorrespondenceSet set = ntrack::io::read_correspondences(correspondences);
    ntrack::DeformationGraph g;
    if (std::strcmp(graph, "auto") == 0) {
      ntrack::GraphOptions go;
      go.sigma = sigma;
      g = ntrack::build_graph(source, go);
    } else {
      g = ntrack::io::read_graph(graph);
    }
    const ntrack::SkinningTable skin = ntrack::compute_skinning(source, g.nodes, g.sigma);
    const ntrack::TrackingProblem problem{camera, source, target, g, skin, set};
    ntrack::SolveResult r = ntrack::gauss_newton_solve(problem, make_config(options, set));
    auto m = std::make_unique<nt_motion>();
    m->motion = std::move(r.motion);
    m->final_residual = r.final_residual_norm;
    *out = m.release();
  });
}

nt_status nt_solve_scene(const nt_scene* scene, const nt_solver_options* options,
                         nt_motion** out, nt_metrics* metrics) {
  return guarded([&] {
    require(scene && out, "nt_solve_scene: null argument");
    *out = nullptr;
    const ntrack::SyntheticScene& s = scene->scene;
    const ntrack::TrackingProblem problem{s.camera, s.source, s.target,
                                          s.graph,  s.skin,   s.correspondences};
    ntrack::SolveResult r = ntrack::gauss_newton_solve(problem, make_config(options, s.correspondences));
    if (metrics) {
      const ntrack::Metrics m = ntrack::evaluate_metrics(s.source, s.graph, s.skin, r.motion,
                                                         s.flow, s.gt_motion.translations,
                                                         s.node_mask, r.active_nodes);
      *metrics = {m.epe3d, m.graph_error3d, m.pixels, m.nodes};
    }
    auto m = std::make_unique<nt_motion>();
    m->motion = std::move(r.motion);
    m->final_residual = r.final_residual_norm;
    *out = m.release();
  });
}

uint64_t nt_motion_node_count(const nt_motion* motion) {
  return motion ? motion->motion.node_count() : 0;
}

nt_status nt_motion_node(const nt_motion* motion, uint64_t node, double rotation[9],
                         double translation[3]) {
  return guarded([&] {
    require(motion && rotation && translation, "nt_motion_node: null argument");
    require(node < motion->motion.node_count(), "nt_motion_node: node index out of range");
    const auto& r = motion->motion.rotations[node];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) rotation[3 * a + b] = r(a, b);
      translation[a] = motion->motion.translations[node][a];
    }
  });
}

double nt_motion_final_residual(const nt_motion* motion) {
  return motion ? motion->final_residual : std::nan("");
}

nt_status nt_motion_json(const nt_motion* motion, char** out) {
  return guarded([&] {
    require(motion && out, "nt_motion_json: null argument");
    *out = dup_string(ntrack::io::motion_to_json(motion->motion));
  });
}

nt_status nt_motion_save(const nt_motion* motion, const char* path) {
  return guarded([&] {
    require(motion && path, "nt_motion_save: null argument");
    ntrack::io::write_motion(path, motion->motion);
  });
}

void nt_motion_free(nt_motion* motion) { delete motion; }

nt_status nt_gradcheck(const nt_scene* scene, const nt_solver_options* options, double eps_w,
                       double eps_c, uint64_t max_entries, char** report_json) {
  return guarded([&] {
    require(scene && report_json, "nt_gradcheck: null argument");
    *report_json = nullptr;
    const ntrack::SyntheticScene& s = scene->scene;
    const ntrack::TrackingProblem problem{s.camera, s.source, s.target,
                                          s.graph,  s.skin,   s.correspondences};
    const ntrack::LossTargets targets{s.gt_motion.translations, s.node_mask, s.flow, s.flow_mask};
    std::optional<std::size_t> limit;
    if (max_entries > 0) limit = static_cast<std::size_t>(max_entries);
    const ntrack::GradcheckReport r = ntrack::gradcheck(
        problem, make_config(options, s.correspondences), targets, eps_w, eps_c, limit);
    static const char* kNames[] = {"w", "cx", "cy"};
    json entries = json::array();
    for (const auto& e : r.entries) {
      entries.push_back({{"correspondence", e.correspondence},
                         {"parameter", kNames[e.parameter]},
                         {"analytic", e.analytic},
                         {"numeric", e.numeric},
                         {"rel_error", e.rel_error}});
    }
    const json j = {{"loss", r.loss},
                    {"unknowns", r.unknowns},
                    {"eps_w", eps_w},
                    {"eps_c", eps_c},
                    {"p99_weight", r.p99_weight},
                    {"p99_target", r.p99_target},
                    {"max_weight", r.max_weight},
                    {"max_target", r.max_target},
                    {"entries", entries}};
    *report_json = dup_string(j.dump(2) + "\n");
  });
}

void nt_learn_options_default(nt_learn_options* o) {
  if (!o) return;
  const ntrack::WeightLearningConfig c;
  o->outlier_fraction = 0.3;
  o->outlier_seed = 0;
  o->steps = c.steps;
  o->step_size = c.step_size;
  o->initial_logit = c.initial_logit;
  nt_solver_options_default(&o->solver);
}

nt_status nt_learn_weights(const nt_scene* scene, const nt_learn_options* options,
                           nt_learn_summary* summary, char** weights_json, char** curve_csv) {
  return guarded([&] {
    require(scene, "nt_learn_weights: null scene");
    nt_learn_options d;
    nt_learn_options_default(&d);
    if (!options) options = &d;
    const ntrack::SyntheticScene& s = scene->scene;
    const ntrack::OutlierInjection inj = ntrack::inject_outliers(
        s, s.correspondences, options->outlier_fraction, options->outlier_seed);

    ntrack::WeightLearningConfig cfg;
    cfg.steps = options->steps;
    cfg.step_size = options->step_size;
    cfg.initial_logit = options->initial_logit;
    cfg.solver = make_config(&options->solver, inj.correspondences);

    const ntrack::LossTargets targets{s.gt_motion.translations, s.node_mask, s.flow, s.flow_mask};
    auto epe = [&](const ntrack::CorrespondenceSet& set) {
      const ntrack::TrackingProblem p{s.camera, s.source, s.target, s.graph, s.skin, set};
      const ntrack::SolveResult r = ntrack::gauss_newton_solve(p, cfg.solver);
      return ntrack::evaluate_metrics(s.source, s.graph, s.skin, r.motion, s.flow,
                                      s.gt_motion.translations, s.node_mask, r.active_nodes)
          .epe3d;
    };

    const ntrack::TrackingProblem problem{s.camera, s.source, s.target,
                                          s.graph,  s.skin,   inj.correspondences};
    const ntrack::WeightLearningResult learned = ntrack::optimize_weights(problem, targets, cfg);

    ntrack::CorrespondenceSet weighted = inj.correspondences;
    ntrack::CorrespondenceSet oracle = inj.correspondences;
    std::vector<double> win, wout;
    for (std::size_t k = 0; k < weighted.size(); ++k) {
      weighted.entries[k].weight = learned.weights[k];
      if (inj.outlier[k]) oracle.entries[k].valid = false;
      if (!weighted.entries[k].valid) continue;
      (inj.outlier[k] ? wout : win).push_back(learned.weights[k]);
    }

    if (summary) {
      summary->loss_initial = learned.loss_curve.front();
      summary->loss_final = learned.loss_curve.back();
      summary->epe_uniform = epe(inj.correspondences);
      summary->epe_learned = epe(weighted);
      summary->epe_oracle = epe(oracle);
      summary->median_inlier_weight = median(win);
      summary->median_outlier_weight = median(wout);
      summary->outliers = wout.size();
    }
    if (weights_json) {
      json arr = json::array();
      for (std::size_t k = 0; k < weighted.size(); ++k) {
        const auto& e = weighted.entries[k];
        arr.push_back({{"ux", e.ux},
                       {"uy", e.uy},
                       {"weight", e.weight},
                       {"valid", e.valid},
                       {"outlier", inj.outlier[k] != 0}});
      }
      *weights_json = dup_string(arr.dump() + "\n");
    }
    if (curve_csv) {
      std::ostringstream os;
      os.precision(17);
      os << "step,loss\n";
      for (std::size_t i = 0; i < learned.loss_curve.size(); ++i) {
        os << i << ',' << learned.loss_curve[i] << '\n';
      }
      *curve_csv = dup_string(os.str());
    }
  });
}

nt_status nt_sequence_write(const char* kind, int width, int height, int frames, uint64_t seed,
                            int keyframe_interval, const char* frames_dir,
                            const char* corr_dir) {
  return guarded([&] {
    require(kind && frames_dir && corr_dir, "nt_sequence_write: null argument");
    require(keyframe_interval > 0, "nt_sequence_write: keyframe_interval must be positive");
    const ntrack::SyntheticSequence seq = ntrack::generate_sequence(
        ntrack::scene_kind_from_string(kind), width, height, frames, seed);
    const fs::path fd(frames_dir), cd(corr_dir);
    std::error_code ec;
    fs::create_directories(fd, ec);
    if (!ec) fs::create_directories(cd, ec);
    if (ec) throw ntrack::Error(ntrack::ErrorCode::kIo, "cannot create output directories: " + ec.message());
    ntrack::io::write_intrinsics(fd / "intrinsics.json", seq.base.camera);
    ntrack::io::write_graph(fd / "graph.json", seq.base.graph);
    ntrack::io::write_skinning(fd / "skinning.skn", seq.base.skin);
    for (int f = 0; f < frames; ++f) {
      ntrack::io::write_depth_dgn(fd / frame_name("frame_", f, ".dgn"), seq.depths[f]);
      ntrack::io::write_motion(fd / frame_name("gt_", f, ".json"), seq.gt_motion[f]);
    }
    for (int k = 0; k < frames; k += keyframe_interval) {
      for (int f = k + 1; f < frames; ++f) {
        ntrack::io::write_correspondences(cd / pair_name('k', k, 'f', f), seq.correspondences(k, f));
        ntrack::io::write_correspondences(cd / pair_name('f', f, 'k', k), seq.correspondences(f, k));
      }
    }
  });
}

nt_status nt_track_files(const char* frames_dir, const char* policy_json, const char* corr_dir,
                         char** tracked_json, char** stats_csv) {
  return guarded([&] {
    require(frames_dir && corr_dir, "nt_track_files: null argument");
    const fs::path fd(frames_dir);
    ntrack::KeyframePolicy policy;
    nt_solver_options solver;
    nt_solver_options_default(&solver);
    solver.min_cluster_correspondences = -1;
    std::optional<ntrack::GraphOptions> graph_options;
    if (policy_json) {
      const auto bytes = ntrack::io::read_file(policy_json);
      read_policy(json::parse(bytes.begin(), bytes.end()), policy, solver, graph_options);
    }
    policy.validate();

    const ntrack::CameraIntrinsics camera = ntrack::io::read_intrinsics(fd / "intrinsics.json");
    camera.validate();
    std::vector<ntrack::PointImage> frames;
    for (int f = 0;; ++f) {
      const fs::path dgn = fd / frame_name("frame_", f, ".dgn");
      const fs::path png = fd / frame_name("frame_", f, ".png");
      if (fs::exists(dgn)) frames.push_back(ntrack::PointImage::from_depth(ntrack::io::read_depth(dgn), camera));
      else if (fs::exists(png)) frames.push_back(ntrack::PointImage::from_depth(ntrack::io::read_depth(png), camera));
      else break;
    }
    require(frames.size() >= 2, "nt_track_files: need frame_0000 and frame_0001 at least");

    ntrack::DeformationGraph graph;
    ntrack::SkinningTable skin;
    if (!graph_options && fs::exists(fd / "graph.json")) {
      graph = ntrack::io::read_graph(fd / "graph.json");
      skin = fs::exists(fd / "skinning.skn")
                 ? ntrack::io::read_skinning(fd / "skinning.skn")
                 : ntrack::compute_skinning(frames[0], graph.nodes, graph.sigma);
    } else {
      graph = ntrack::build_graph(frames[0], graph_options.value_or(ntrack::GraphOptions{}));
      skin = ntrack::compute_skinning(frames[0], graph.nodes, graph.sigma);
    }

    std::vector<std::vector<ntrack::Vec3>> gt;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const fs::path p = fd / frame_name("gt_", static_cast<int>(f), ".json");
      if (!fs::exists(p)) {
        gt.clear();
        break;
      }
      ntrack::GraphMotion m = ntrack::io::read_motion(p);
      require(m.node_count() == graph.node_count(), "nt_track_files: ground truth node count mismatch");
      gt.push_back(std::move(m.translations));
    }

    // The cluster threshold scales with the correspondences of one frame pair.
    ntrack::CorrespondenceSet probe;
    FileProvider provider(corr_dir);
    if (solver.min_cluster_correspondences < 0) {
      try {
        probe = provider.forward(0, 1);
      } catch (const ntrack::Error&) {
      }
    }
    const ntrack::SolverConfig config = make_config(&solver, probe);

    const ntrack::TrackedSequence seq =
        ntrack::track_sequence(frames, camera, graph, skin, provider, policy, config, gt);

    if (tracked_json) {
      json arr = json::array();
      for (const auto& fr : seq.frames) {
        json kf = json::array();
        for (const auto& st : fr.keyframes) {
          kf.push_back({{"keyframe", st.keyframe},
                        {"total", st.total},
                        {"invalid_input", st.invalid_input},
                        {"threshold", st.rejected_threshold},
                        {"bidirectional", st.rejected_bidirectional},
                        {"multi_keyframe", st.rejected_multi_keyframe},
                        {"survivors", st.survivors},
                        {"kept", st.kept}});
        }
        arr.push_back({{"frame", fr.frame},
                       {"tracked", fr.tracked},
                       {"valid_keyframes", fr.valid_keyframes},
                       {"correspondences", fr.correspondences},
                       {"graph_error3d", fr.graph_error3d ? json(*fr.graph_error3d) : json(nullptr)},
                       {"message", fr.message},
                       {"keyframes", kf},
                       {"motion", json::parse(ntrack::io::motion_to_json(fr.motion))}});
      }
      *tracked_json = dup_string(json{{"frames", arr}}.dump() + "\n");
    }
    if (stats_csv) {
      std::ostringstream os;
      os << "frame,keyframe,total,invalid_input,threshold,bidirectional,multi_keyframe,survivors,kept\n";
      for (const auto& fr : seq.frames) {
        for (const auto& st : fr.keyframes) {
          os << fr.frame << ',' << st.keyframe << ',' << st.total << ',' << st.invalid_input << ','
             << st.rejected_threshold << ',' << st.rejected_bidirectional << ','
             << st.rejected_multi_keyframe << ',' << st.survivors << ',' << (st.kept ? 1 : 0)
             << '\n';
        }
      }
      *stats_csv = dup_string(os.str());
    }
  });
}

}  // extern "C"
