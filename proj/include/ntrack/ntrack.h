/* C interface to the ntrack library. All handles are opaque; every call
 * that can fail returns an nt_status and leaves a message retrievable with
 * nt_last_error() on the calling thread. Strings handed out by the library
 * are released with nt_string_free. */
#ifndef NTRACK_NTRACK_H
#define NTRACK_NTRACK_H

#include <stddef.h>
#include <stdint.h>

#if defined(NTRACK_BUILDING_LIBRARY)
#define NT_API __attribute__((visibility("default")))
#else
#define NT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nt_status {
  NT_OK = 0,
  NT_INVALID_INPUT = 1,
  NT_BEHIND_CAMERA = 2,
  NT_EMPTY_MESH = 3,
  NT_UNSUPPORTED_POINT = 4,
  NT_UNDERDETERMINED = 5,
  NT_SINGULAR_SYSTEM = 6,
  NT_DIVERGENCE = 7,
  NT_IO = 8,
  NT_GENERATION = 9,
  NT_INTERNAL = 100
} nt_status;

typedef struct nt_scene nt_scene;
typedef struct nt_motion nt_motion;

/* Message of the last failure on this thread ("" if none). */
NT_API const char* nt_last_error(void);
NT_API const char* nt_status_string(nt_status status);
NT_API void nt_string_free(char* s);

typedef struct nt_solver_options {
  int max_iter;
  double lambda_2d;
  double lambda_depth;
  double lambda_reg;
  /* Negative: 2000 scaled by (valid correspondences / 10000), capped at 2000. */
  int64_t min_cluster_correspondences;
  double damping;
  uint64_t subsample; /* 0 = use all correspondences */
  uint64_t seed;
} nt_solver_options;

NT_API void nt_solver_options_default(nt_solver_options* options);

typedef struct nt_metrics {
  double epe3d;
  double graph_error3d;
  uint64_t pixels;
  uint64_t nodes;
} nt_metrics;

/* Scenes. kind is one of rigid, articulated_bend, smooth_sine, two_cluster. */
NT_API nt_status nt_scene_generate(const char* kind, int width, int height, uint64_t seed,
                                   nt_scene** out);
NT_API nt_status nt_scene_load(const char* dir, nt_scene** out);
NT_API nt_status nt_scene_save(const nt_scene* scene, const char* dir);
/* Gaussian noise on correspondence targets (pixels) and target depth (m). */
NT_API nt_status nt_scene_add_noise(nt_scene* scene, double corr_sigma_px, double depth_sigma_m,
                                    uint64_t seed);
NT_API nt_status nt_scene_size(const nt_scene* scene, int* width, int* height,
                               uint64_t* nodes, uint64_t* correspondences);
NT_API void nt_scene_free(nt_scene* scene);

/* Solve from files. graph is a graph JSON path or "auto" (built on the
 * source frame with sigma). */
NT_API nt_status nt_solve_files(const char* source_depth, const char* target_depth,
                                const char* intrinsics, const char* correspondences,
                                const char* graph, double sigma,
                                const nt_solver_options* options, nt_motion** out);
/* Solve a scene's own correspondences; metrics may be NULL. */
NT_API nt_status nt_solve_scene(const nt_scene* scene, const nt_solver_options* options,
                                nt_motion** out, nt_metrics* metrics);

NT_API uint64_t nt_motion_node_count(const nt_motion* motion);
/* R row-major. */
NT_API nt_status nt_motion_node(const nt_motion* motion, uint64_t node, double rotation[9],
                                double translation[3]);
NT_API double nt_motion_final_residual(const nt_motion* motion);
/* Motion JSON text (caller frees). */
NT_API nt_status nt_motion_json(const nt_motion* motion, char** out);
NT_API nt_status nt_motion_save(const nt_motion* motion, const char* path);
NT_API void nt_motion_free(nt_motion* motion);

/* Finite-difference check of the solver gradients on the scene's
 * correspondences. max_entries = 0 checks every valid entry. JSON report. */
NT_API nt_status nt_gradcheck(const nt_scene* scene, const nt_solver_options* options,
                              double eps_w, double eps_c, uint64_t max_entries,
                              char** report_json);

typedef struct nt_learn_options {
  double outlier_fraction;
  uint64_t outlier_seed;
  int steps;
  double step_size;
  double initial_logit;
  nt_solver_options solver;
} nt_learn_options;

NT_API void nt_learn_options_default(nt_learn_options* options);

typedef struct nt_learn_summary {
  double loss_initial;
  double loss_final;
  double epe_uniform;
  double epe_learned;
  double epe_oracle;
  double median_inlier_weight;
  double median_outlier_weight;
  uint64_t outliers;
} nt_learn_summary;

/* Injects outliers into the scene's correspondences and learns weights.
 * weights_json lists per entry {ux, uy, weight, outlier}; curve_csv holds
 * step,loss. Either output pointer may be NULL. */
NT_API nt_status nt_learn_weights(const nt_scene* scene, const nt_learn_options* options,
                                  nt_learn_summary* summary, char** weights_json,
                                  char** curve_csv);

/* Writes a synthetic sequence: frames_dir gets frame_%04d.dgn,
 * intrinsics.json, graph.json, skinning.skn and gt_%04d.json; corr_dir gets
 * k{K}_f{F}.cor and f{F}_k{K}.cor for every keyframe K (multiples of
 * keyframe_interval) and later frame F. */
NT_API nt_status nt_sequence_write(const char* kind, int width, int height, int frames,
                                   uint64_t seed, int keyframe_interval, const char* frames_dir,
                                   const char* corr_dir);

/* Tracks a frames directory (see nt_sequence_write) with a policy JSON file
 * (NULL = defaults). Outputs the tracked JSON and a CSV of filter counts. */
NT_API nt_status nt_track_files(const char* frames_dir, const char* policy_json,
                                const char* corr_dir, char** tracked_json, char** stats_csv);

#ifdef __cplusplus
}
#endif

#endif
