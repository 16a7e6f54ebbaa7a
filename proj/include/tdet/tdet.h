/* SPDX-License-Identifier: Apache-2.0 */
#ifndef TDET_TDET_H_
#define TDET_TDET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(TDET_BUILDING_LIBRARY)
#define TDET_API __attribute__((visibility("default")))
#else
#define TDET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every failing call also sets a thread-local message readable
 * through tdet_last_error(). */
typedef enum tdet_status {
  TDET_OK = 0,
  TDET_E_INVALID_ARGUMENT = 1,
  TDET_E_DEGENERATE_SEGMENT = 2,
  TDET_E_EMPTY_REGION = 3,
  TDET_E_SHAPE_MISMATCH = 4,
  TDET_E_IO = 5,
  TDET_E_PARSE = 6,
  TDET_E_VALIDATION = 7,
  TDET_E_DIVERGED = 8,
  TDET_E_INTERNAL = 99
} tdet_status;

typedef struct tdet_model tdet_model;

/* Per-epoch progress line during training. */
typedef void (*tdet_log_fn)(const char* line, void* user);

TDET_API const char* tdet_version(void);
/* Message of the last failing call on this thread; empty when none. */
TDET_API const char* tdet_last_error(void);
/* Releases strings returned through char** out-parameters. */
TDET_API void tdet_free_string(char* s);

/* Configuration documents are JSON objects with optional sections "model",
 * "train", "detect", "synth". Missing keys keep their defaults; NULL or ""
 * means all defaults. */

/* Writes the effective configuration (defaults merged) to *out_json. */
TDET_API tdet_status tdet_config_resolve(const char* config_json, char** out_json);

/* Writes annotations.jsonl and features/<id>.tdfv under out_dir. */
TDET_API tdet_status tdet_generate_data(const char* config_json, const char* out_dir,
                                        char** summary_json);

TDET_API tdet_status tdet_model_create(const char* config_json, uint64_t seed, tdet_model** out);
/* Reads a checkpoint and its "<path>.json" model description. */
TDET_API tdet_status tdet_model_load(const char* checkpoint_path, tdet_model** out);
/* Writes a checkpoint and its "<path>.json" model description. */
TDET_API tdet_status tdet_model_save(const tdet_model* model, const char* checkpoint_path);
TDET_API void tdet_model_destroy(tdet_model* model);
TDET_API tdet_status tdet_model_config(const tdet_model* model, char** out_json);

TDET_API tdet_status tdet_train(tdet_model* model, const char* annotations_path,
                                const char* config_json, tdet_log_fn log, void* user,
                                char** summary_json);

/* Detects activities in every video of annotations_path and writes the
 * tab-separated detection file. proposals_path may be NULL; otherwise the
 * surviving stage-1 proposals are written there with class id 0. */
TDET_API tdet_status tdet_detect(const tdet_model* model, const char* annotations_path,
                                 const char* config_json, const char* detections_path,
                                 const char* proposals_path, char** summary_json);

/* mAP at the given thresholds. When proposals_path is non-NULL the result
 * also carries proposal precision/recall at proposal_iou, over proposals
 * scoring at least proposal_score. table_text may be NULL. */
TDET_API tdet_status tdet_eval(const char* annotations_path, const char* detections_path,
                               const double* thresholds, size_t num_thresholds,
                               const char* proposals_path, double proposal_iou,
                               double proposal_score, char** result_json, char** table_text);

TDET_API tdet_status tdet_bench(const tdet_model* model, const char* config_json,
                                int buffers_per_rep, int repetitions, int warmup, uint64_t seed,
                                char** result_json);

/* Geometry helpers. */
TDET_API double tdet_segment_iou(double a_start, double a_end, double b_start, double b_end);
/* Greedy NMS; writes kept indices (descending score) to keep, which must
 * hold n entries. */
TDET_API tdet_status tdet_nms(const double* starts, const double* ends, const double* scores,
                              size_t n, double threshold, size_t* keep, size_t* num_kept);

#ifdef __cplusplus
}
#endif

#endif /* TDET_TDET_H_ */
