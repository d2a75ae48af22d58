// ntrack command-line front end. Everything goes through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ntrack/ntrack.h"

namespace {

struct Failure {
  nt_status status;
};

void check(nt_status s) {
  if (s != NT_OK) {
    std::cerr << "ntrack: " << nt_status_string(s) << ": " << nt_last_error() << "\n";
    throw Failure{s};
  }
}

struct SceneDeleter {
  void operator()(nt_scene* s) const { nt_scene_free(s); }
};
struct MotionDeleter {
  void operator()(nt_motion* m) const { nt_motion_free(m); }
};
struct StringDeleter {
  void operator()(char* s) const { nt_string_free(s); }
};
using ScenePtr = std::unique_ptr<nt_scene, SceneDeleter>;
using MotionPtr = std::unique_ptr<nt_motion, MotionDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "ntrack: cannot write '" << path << "'\n";
    throw Failure{NT_IO};
  }
}

ScenePtr load_scene(const std::string& dir) {
  nt_scene* s = nullptr;
  check(nt_scene_load(dir.c_str(), &s));
  return ScenePtr(s);
}

// Options shared by every subcommand that runs the solver.
struct SolverFlags {
  nt_solver_options o{};
  SolverFlags() {
    nt_solver_options_default(&o);
    o.min_cluster_correspondences = -1;
  }
  void add(CLI::App* app) {
    app->add_option("--iters", o.max_iter, "Gauss-Newton iterations")->check(CLI::PositiveNumber);
    app->add_option("--lambda2d", o.lambda_2d);
    app->add_option("--lambdadepth", o.lambda_depth);
    app->add_option("--lambdareg", o.lambda_reg);
    app->add_option("--min-cluster", o.min_cluster_correspondences,
                    "minimum correspondences per cluster (negative: scaled to the input)");
    app->add_option("--damping", o.damping);
    app->add_option("--subsample", o.subsample, "random correspondence subset (0 = all)");
    app->add_option("--seed", o.seed);
  }
};

std::string metrics_text(const nt_metrics& m) {
  const nlohmann::json j = {{"epe3d", m.epe3d},
                            {"graph_error3d", m.graph_error3d},
                            {"pixels", m.pixels},
                            {"nodes", m.nodes}};
  return j.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable non-rigid tracking"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene or sequence");
  std::string kind = "rigid", res = "160x120", synth_out, corr_dir;
  std::uint64_t synth_seed = 0;
  int frames = 0, interval = 50;
  double noise_px = 0.0, depth_noise = 0.0;
  synth->add_option("--kind", kind, "rigid | articulated_bend | smooth_sine | two_cluster");
  synth->add_option("--res", res, "WIDTHxHEIGHT");
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--frames", frames, "write a sequence of this many frames instead");
  synth->add_option("--corr-dir", corr_dir, "sequence correspondence directory");
  synth->add_option("--interval", interval, "sequence keyframe interval");
  synth->add_option("--noise", noise_px, "correspondence noise (pixels)");
  synth->add_option("--depth-noise", depth_noise, "target depth noise (meters)");

  // solve
  auto* solve = app.add_subcommand("solve", "estimate graph motion");
  std::string src, tgt, intr, corr, graph = "auto", solve_out, scene_dir, metrics_out;
  double sigma = 0.05;
  SolverFlags solve_flags;
  solve->add_option("--source", src);
  solve->add_option("--target", tgt);
  solve->add_option("--intrinsics", intr);
  solve->add_option("--corr", corr);
  solve->add_option("--graph", graph, "graph JSON or 'auto'");
  solve->add_option("--sigma", sigma, "node spacing for --graph auto (meters)");
  solve->add_option("--scene", scene_dir, "solve a synth scene directory instead");
  solve->add_option("--metrics", metrics_out, "metrics JSON (with --scene)");
  solve->add_option("--out", solve_out, "motion JSON")->required();
  solve_flags.add(solve);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of solver gradients");
  std::string gc_scene, gc_out;
  double eps_w = 1e-4, eps_c = 1e-3;
  std::uint64_t max_entries = 64;
  SolverFlags gc_flags;
  gc->add_option("--scene", gc_scene)->required();
  gc->add_option("--eps-w", eps_w);
  gc->add_option("--eps-c", eps_c);
  gc->add_option("--max-entries", max_entries, "correspondences to check (0 = all)");
  gc->add_option("--out", gc_out, "report path (default stdout)");
  gc_flags.add(gc);

  // learn-weights
  auto* lw = app.add_subcommand("learn-weights", "learn correspondence weights");
  std::string lw_scene, lw_out, lw_curve;
  nt_learn_options lopt{};
  nt_learn_options_default(&lopt);
  double lw_noise = 0.0;
  SolverFlags lw_flags;
  lw->add_option("--scene", lw_scene)->required();
  lw->add_option("--outliers", lopt.outlier_fraction);
  lw->add_option("--outlier-seed", lopt.outlier_seed);
  lw->add_option("--noise", lw_noise, "correspondence noise added first (pixels)");
  lw->add_option("--steps", lopt.steps);
  lw->add_option("--lr", lopt.step_size);
  lw->add_option("--out", lw_out)->required();
  lw->add_option("--curve", lw_curve);
  lw_flags.add(lw);

  // track
  auto* tr = app.add_subcommand("track", "keyframe tracking over a frame directory");
  std::string tr_frames, tr_policy, tr_corr, tr_out, tr_stats;
  tr->add_option("--frames", tr_frames)->required();
  tr->add_option("--policy", tr_policy);
  tr->add_option("--corr-dir", tr_corr)->required();
  tr->add_option("--out", tr_out)->required();
  tr->add_option("--stats", tr_stats, "filter statistics CSV (default: --out with .csv)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      int w = 0, h = 0;
      if (std::sscanf(res.c_str(), "%dx%d", &w, &h) != 2) {
        std::cerr << "ntrack: --res must look like 160x120\n";
        return NT_INVALID_INPUT;
      }
      if (frames > 0) {
        if (corr_dir.empty()) corr_dir = synth_out + "/corr";
        check(nt_sequence_write(kind.c_str(), w, h, frames, synth_seed, interval,
                                synth_out.c_str(), corr_dir.c_str()));
      } else {
        nt_scene* s = nullptr;
        check(nt_scene_generate(kind.c_str(), w, h, synth_seed, &s));
        ScenePtr scene(s);
        if (noise_px > 0.0 || depth_noise > 0.0) {
          check(nt_scene_add_noise(scene.get(), noise_px, depth_noise, synth_seed));
        }
        check(nt_scene_save(scene.get(), synth_out.c_str()));
      }
    } else if (*solve) {
      nt_motion* m = nullptr;
      if (!scene_dir.empty()) {
        ScenePtr scene = load_scene(scene_dir);
        nt_metrics metrics{};
        check(nt_solve_scene(scene.get(), &solve_flags.o, &m, &metrics));
        if (!metrics_out.empty()) write_text(metrics_out, metrics_text(metrics));
      } else {
        if (src.empty() || tgt.empty() || intr.empty() || corr.empty()) {
          std::cerr << "ntrack: solve needs --scene or --source/--target/--intrinsics/--corr\n";
          return NT_INVALID_INPUT;
        }
        check(nt_solve_files(src.c_str(), tgt.c_str(), intr.c_str(), corr.c_str(), graph.c_str(),
                             sigma, &solve_flags.o, &m));
      }
      MotionPtr motion(m);
      check(nt_motion_save(motion.get(), solve_out.c_str()));
    } else if (*gc) {
      ScenePtr scene = load_scene(gc_scene);
      char* report = nullptr;
      check(nt_gradcheck(scene.get(), &gc_flags.o, eps_w, eps_c, max_entries, &report));
      StringPtr text(report);
      if (gc_out.empty()) std::cout << text.get();
      else write_text(gc_out, text.get());
    } else if (*lw) {
      ScenePtr scene = load_scene(lw_scene);
      if (lw_noise > 0.0) check(nt_scene_add_noise(scene.get(), lw_noise, 0.0, lopt.outlier_seed));
      lopt.solver = lw_flags.o;
      nt_learn_summary summary{};
      char* weights = nullptr;
      char* curve = nullptr;
      check(nt_learn_weights(scene.get(), &lopt, &summary, &weights, lw_curve.empty() ? nullptr : &curve));
      StringPtr wtext(weights), ctext(curve);
      write_text(lw_out, wtext.get());
      if (ctext) write_text(lw_curve, ctext.get());
      const nlohmann::json j = {{"loss_initial", summary.loss_initial},
                                {"loss_final", summary.loss_final},
                                {"epe_uniform", summary.epe_uniform},
                                {"epe_learned", summary.epe_learned},
                                {"epe_oracle", summary.epe_oracle},
                                {"median_inlier_weight", summary.median_inlier_weight},
                                {"median_outlier_weight", summary.median_outlier_weight},
                                {"outliers", summary.outliers}};
      std::cout << j.dump(2) << "\n";
    } else if (*tr) {
      char* tracked = nullptr;
      char* stats = nullptr;
      check(nt_track_files(tr_frames.c_str(), tr_policy.empty() ? nullptr : tr_policy.c_str(),
                           tr_corr.c_str(), &tracked, &stats));
      StringPtr ttext(tracked), stext(stats);
      write_text(tr_out, ttext.get());
      if (tr_stats.empty()) {
        const auto dot = tr_out.find_last_of('.');
        const auto slash = tr_out.find_last_of('/');
        tr_stats = (dot != std::string::npos && (slash == std::string::npos || dot > slash)
                        ? tr_out.substr(0, dot)
                        : tr_out) +
                   ".csv";
      }
      write_text(tr_stats, stext.get());
    }
  } catch (const Failure& f) {
    return static_cast<int>(f.status);
  }
  return 0;
}
