/* Copyright 2026 The lbcem Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the lbcem simulator.
 *
 * Every fallible call returns an lbcem_status. On failure a message is
 * available from lbcem_last_error() on the calling thread until the next
 * call on that thread. Handles are opaque and owned by the caller; free
 * them with the matching *_free function (NULL is accepted). A handle may
 * be read from several threads at once but not mutated concurrently.
 */

#ifndef LBCEM_LBCEM_H_
#define LBCEM_LBCEM_H_

#include <stddef.h>
#include <stdint.h>

#if defined(LBCEM_BUILDING_LIBRARY)
#define LBCEM_API __attribute__((visibility("default")))
#else
#define LBCEM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lbcem_status {
  LBCEM_OK = 0,
  LBCEM_ERR_ARGUMENT = 1,   /* null pointer, bad size */
  LBCEM_ERR_CONFIG = 2,     /* parse or validation failure */
  LBCEM_ERR_NUMERICAL = 3,  /* solver or model breakdown */
  LBCEM_ERR_SAFETY = 4,     /* collision abort */
  LBCEM_ERR_IO = 5,
  LBCEM_ERR_STATE = 6,      /* call not valid in the object's state */
  LBCEM_ERR_INTERNAL = 7
} lbcem_status;

LBCEM_API const char* lbcem_version(void);
LBCEM_API const char* lbcem_last_error(void);
LBCEM_API const char* lbcem_status_name(lbcem_status status);

/* ---- Scenarios ---------------------------------------------------------- */

typedef struct lbcem_scenario lbcem_scenario;

LBCEM_API lbcem_status lbcem_scenario_load(const char* path,
                                           lbcem_scenario** out);
LBCEM_API lbcem_status lbcem_scenario_parse(const char* yaml_text,
                                            lbcem_scenario** out);
LBCEM_API lbcem_status lbcem_scenario_clone(const lbcem_scenario* scenario,
                                            lbcem_scenario** out);
/* Dotted key ("cem.samples") or one of the shortcuts "variant", "wind",
 * "horizon" (seconds) and "seed". The value is a YAML scalar or flow
 * sequence. Unparseable values fail here; unknown keys and bad values
 * fail at validate or run time. */
LBCEM_API lbcem_status lbcem_scenario_set(lbcem_scenario* scenario,
                                          const char* key, const char* value);
LBCEM_API lbcem_status lbcem_scenario_validate(const lbcem_scenario* scenario);
LBCEM_API void lbcem_scenario_free(lbcem_scenario* scenario);

/* ---- Runs --------------------------------------------------------------- */

typedef struct lbcem_run lbcem_run;

typedef struct lbcem_metrics {
  int32_t steps;
  double rms_error;
  double max_error;
  double min_barrier;
  int32_t penetrations;
  double min_clearance;
  int32_t interventions;
  int32_t gp_updates;
  double gp_coverage[3]; /* NaN when the variant has no GP */
  int32_t obstacle_count;
} lbcem_metrics;

/* Simulates the scenario. Returns LBCEM_OK, or LBCEM_ERR_NUMERICAL /
 * LBCEM_ERR_SAFETY when the loop stopped early; in those two cases *out
 * still receives the partial run so its logs can be written. On any other
 * error *out is set to NULL. */
LBCEM_API lbcem_status lbcem_run_execute(const lbcem_scenario* scenario,
                                         lbcem_run** out);
LBCEM_API lbcem_status lbcem_run_status(const lbcem_run* run);
/* Empty string for completed runs. Owned by the run. */
LBCEM_API const char* lbcem_run_error(const lbcem_run* run);
/* "<scenario>_<variant>_<wind>_h<horizon>_s<seed>", safe for file names.
 * Owned by the run. */
LBCEM_API const char* lbcem_run_label(const lbcem_run* run);
/* One JSON object without newline. Owned by the run. */
LBCEM_API const char* lbcem_run_summary_json(const lbcem_run* run);
LBCEM_API lbcem_status lbcem_run_get_metrics(const lbcem_run* run,
                                             lbcem_metrics* out);
/* NaN when obstacle `index` was never avoided. */
LBCEM_API lbcem_status lbcem_run_avoid_time(const lbcem_run* run,
                                            int32_t index, double* out);
LBCEM_API lbcem_status lbcem_run_write_steps(const lbcem_run* run,
                                             const char* path);
LBCEM_API lbcem_status lbcem_run_write_timing(const lbcem_run* run,
                                              const char* path);
LBCEM_API lbcem_status lbcem_run_write_gp_dataset(const lbcem_run* run,
                                                  const char* path);
/* Appends the summary plus a newline. */
LBCEM_API lbcem_status lbcem_run_append_summary(const lbcem_run* run,
                                                const char* path);
LBCEM_API void lbcem_run_free(lbcem_run* run);

/* ---- Reports ------------------------------------------------------------ */

/* Reads a JSON-lines summary file and writes the wide RMS table and the
 * long per-cell CSV. `cells_path` may be NULL. */
LBCEM_API lbcem_status lbcem_aggregate(const char* summaries_path,
                                       const char* table_path,
                                       const char* cells_path,
                                       int32_t* cell_count);
/* Writes plot-data series for each step log into `out_dir`. */
LBCEM_API lbcem_status lbcem_plot(const char* const* step_logs, size_t count,
                                  const char* out_dir, double c_delta);

/* ---- Building blocks ---------------------------------------------------- */

typedef struct lbcem_gp lbcem_gp;

/* Sliding-window GP with a squared-exponential kernel. */
LBCEM_API lbcem_status lbcem_gp_create(int32_t dim, const double* length_scales,
                                       double prior_variance,
                                       double noise_variance, int32_t capacity,
                                       lbcem_gp** out);
/* Adds while the window has room, then replaces the oldest point. */
LBCEM_API lbcem_status lbcem_gp_update(lbcem_gp* gp, const double* x,
                                       double y);
LBCEM_API lbcem_status lbcem_gp_predict(const lbcem_gp* gp, const double* x,
                                        double* mean, double* variance);
LBCEM_API int32_t lbcem_gp_size(const lbcem_gp* gp);
LBCEM_API void lbcem_gp_free(lbcem_gp* gp);

/* minimize 1/2 x'Hx + c'x subject to Gx <= h. Matrices are row-major;
 * H is n x n, G is m x n. `start` must be feasible. `multipliers` may be
 * NULL. */
LBCEM_API lbcem_status lbcem_qp_solve(int32_t n, int32_t m, const double* H,
                                      const double* c, const double* G,
                                      const double* h, const double* start,
                                      int32_t max_iterations, double* x,
                                      double* multipliers,
                                      int32_t* iterations);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* LBCEM_LBCEM_H_ */
