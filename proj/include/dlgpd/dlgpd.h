// Copyright 2026 The DLGPD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DLGPD_DLGPD_H_
#define DLGPD_DLGPD_H_

/* C interface of the DLGPD library. Every function returns a status code;
 * the message of the most recent failure on the calling thread is available
 * from dlgpd_last_error(). Strings returned through out-parameters are owned
 * by the caller and released with dlgpd_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(DLGPD_BUILDING_LIBRARY)
#define DLGPD_API __attribute__((visibility("default")))
#else
#define DLGPD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dlgpd_status {
  DLGPD_OK = 0,
  DLGPD_ERR_INVALID_ARGUMENT = 1,
  DLGPD_ERR_IO = 2,
  DLGPD_ERR_NUMERICAL = 3,
  DLGPD_ERR_STATE = 4,
  DLGPD_ERR_INTERNAL = 5
} dlgpd_status;

typedef struct dlgpd_config dlgpd_config;
typedef struct dlgpd_model dlgpd_model;

/* Progress and diagnostics. level: 0 debug, 1 info, 2 warning, 3 error.
 * Without a callback, messages go to stderr. */
typedef void (*dlgpd_log_fn)(int level, const char* message, void* user);

DLGPD_API const char* dlgpd_version(void);
DLGPD_API const char* dlgpd_status_string(dlgpd_status status);
DLGPD_API const char* dlgpd_last_error(void);
DLGPD_API void dlgpd_string_free(char* s);
DLGPD_API void dlgpd_set_log_callback(dlgpd_log_fn fn, void* user);
/* Minimum level passed on; default 1. */
DLGPD_API void dlgpd_set_log_level(int level);

/* ---- configuration ------------------------------------------------------ */

/* A new configuration holding the built-in defaults. */
DLGPD_API dlgpd_status dlgpd_config_create(dlgpd_config** out);
DLGPD_API void dlgpd_config_free(dlgpd_config* cfg);
/* Overlays a JSON file. Unknown keys are rejected. */
DLGPD_API dlgpd_status dlgpd_config_merge_file(dlgpd_config* cfg, const char* path);
/* Overlays a JSON document given as text. */
DLGPD_API dlgpd_status dlgpd_config_merge_json(dlgpd_config* cfg, const char* json);
/* "section.key=value"; the value is parsed as JSON, else taken as a string. */
DLGPD_API dlgpd_status dlgpd_config_set(dlgpd_config* cfg, const char* assignment);
DLGPD_API dlgpd_status dlgpd_config_set_seed(dlgpd_config* cfg, uint64_t seed);
/* Validates and returns the effective configuration as JSON text. */
DLGPD_API dlgpd_status dlgpd_config_to_json(const dlgpd_config* cfg, char** out);

/* ---- pipeline stages ---------------------------------------------------- */
/* All stages share one workspace directory; see README for its layout. */

/* Training rollouts and evidence pools for every configured variant. */
DLGPD_API dlgpd_status dlgpd_collect(const dlgpd_config* cfg, const char* workspace);
/* Trains model `index`, or every configured model when index < 0. */
DLGPD_API dlgpd_status dlgpd_train(const dlgpd_config* cfg, const char* workspace, int index);
/* MPC control in `variant` with matching evidence. subset <= 0 runs every
 * configured subset size. */
DLGPD_API dlgpd_status dlgpd_eval_control(const dlgpd_config* cfg, const char* workspace,
                                          const char* variant, int subset);
/* Matching versus original-environment evidence in `variant` with the
 * trained models left untouched. subset <= 0 runs every subset size. */
DLGPD_API dlgpd_status dlgpd_transfer(const dlgpd_config* cfg, const char* workspace,
                                      const char* variant, int subset);
/* Writes a TSV of mean latents (s1 s2 s3 theta theta_dot traj_flag) for the
 * first `limit` rollouts in rollout_dir (all when limit <= 0) and, when
 * trial_json is not NULL, for the trajectory stored in that trial file. */
DLGPD_API dlgpd_status dlgpd_export_latents(const char* checkpoint, const char* rollout_dir,
                                            int limit, const char* trial_json,
                                            const char* out_tsv);

/* ---- acceptance checks ------------------------------------------------- */

typedef void (*dlgpd_result_fn)(int id, int passed, const char* line, void* user);

typedef struct dlgpd_verify_options {
  uint64_t seed;
  const int* criteria; /* NULL selects the default set */
  size_t num_criteria;
  const char* work_dir;     /* NULL: "verify_work" */
  const char* preset_config; /* preset checked by the launchability check */
  int threads;
  dlgpd_result_fn on_result; /* called once per criterion, may be NULL */
  void* user;
} dlgpd_verify_options;

DLGPD_API void dlgpd_verify_options_init(dlgpd_verify_options* opts);
/* Returns DLGPD_OK when the checks ran; *failed counts failing criteria. */
DLGPD_API dlgpd_status dlgpd_verify(const dlgpd_verify_options* opts, int* passed, int* failed);

/* ---- trained models ---------------------------------------------------- */

DLGPD_API dlgpd_status dlgpd_model_load(const char* checkpoint, dlgpd_model** out);
DLGPD_API void dlgpd_model_free(dlgpd_model* model);
DLGPD_API dlgpd_status dlgpd_model_hash(const dlgpd_model* model, uint64_t* out);
DLGPD_API dlgpd_status dlgpd_model_epoch(const dlgpd_model* model, int* out);
/* Conditions the model on the first `limit` rollouts of rollout_dir (all
 * when limit <= 0); required before dlgpd_model_predict. */
DLGPD_API dlgpd_status dlgpd_model_condition(dlgpd_model* model, const char* rollout_dir,
                                             int limit, uint64_t seed);
/* One-step prediction from a normalized latent state. mean and variance
 * receive 3 values each; reward receives the predicted mean reward. */
DLGPD_API dlgpd_status dlgpd_model_predict(const dlgpd_model* model, const double state[3],
                                           double action, double mean[3], double variance[3],
                                           double* reward);

#ifdef __cplusplus
}
#endif

#endif /* DLGPD_DLGPD_H_ */
