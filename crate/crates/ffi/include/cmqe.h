#ifndef CMQE_H
#define CMQE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of POS tags; index order of `symcom_su` arrays.
#define CMQE_POS_COUNT 17

// POS code meaning "token carries no POS tag".
#define CMQE_POS_NONE -1

#define CMQE_LID_L1 0

#define CMQE_LID_L2 1

#define CMQE_LID_OTHER 2

#define CMQE_TASK_QUALITY 0

#define CMQE_TASK_DISAGREEMENT 1

#define CMQE_F1_MACRO 0

#define CMQE_F1_MICRO 1

#define CMQE_F1_WEIGHTED 2

typedef enum CmqeStatus {
  CMQE_STATUS_OK = 0,
  CMQE_STATUS_NULL_ARGUMENT = 1,
  CMQE_STATUS_INVALID_ARGUMENT = 2,
  CMQE_STATUS_IO = 3,
  CMQE_STATUS_MODEL_FILE = 4,
  CMQE_STATUS_DIMENSION_MISMATCH = 5,
  CMQE_STATUS_NON_FINITE = 6,
  CMQE_STATUS_PANIC = 7,
} CmqeStatus;

// Opaque handle to a loaded regression model.
typedef struct CmqeModel CmqeModel;

// Code-mixing metrics of one sentence. A value whose `*_valid` flag is
// false is undefined for the sentence and reported as 0.
typedef struct CmqeMetrics {
  double cmi;
  uint32_t switch_points;
  double burstiness;
  double symcom_sent;
  double symcom_su[CMQE_POS_COUNT];
  bool cmi_valid;
  bool burstiness_valid;
  bool symcom_sent_valid;
  bool symcom_su_valid[CMQE_POS_COUNT];
} CmqeMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or null.
// The pointer stays valid until the next `cmqe_*` call on the same thread.
const char *cmqe_last_error_message(void);

// Name of POS code `index` (e.g. "NOUN"), or null when out of range.
// The string is static.
const char *cmqe_pos_name(int32_t index);

// Loads a model file written by `cmqe train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out_model` must be writable.
enum CmqeStatus cmqe_model_load(const char *path, struct CmqeModel **out_model);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must be null or a handle from [`cmqe_model_load`] not yet freed.
void cmqe_model_free(struct CmqeModel *model);

// Length of the feature vector the model expects.
//
// # Safety
// `model` must be a live handle; `out_dim` must be writable.
enum CmqeStatus cmqe_model_input_dim(const struct CmqeModel *model, size_t *out_dim);

// Task the model was trained for (`CMQE_TASK_*`). Fails with
// `CMQE_STATUS_INVALID_ARGUMENT` when the file records no task.
//
// # Safety
// `model` must be a live handle; `out_task` must be writable.
enum CmqeStatus cmqe_model_task(const struct CmqeModel *model, uint32_t *out_task);

// Raw regression output for one assembled, standardised feature vector
// (the vectors `cmqe train --dump-features` writes).
//
// # Safety
// `features` must point to `len` doubles; `out_prediction` must be writable.
enum CmqeStatus cmqe_model_predict(const struct CmqeModel *model,
                                   const double *features,
                                   size_t len,
                                   double *out_prediction);

// Code-mixing metrics of a sentence given per-token language codes
// (`CMQE_LID_*`) and POS codes (`0..CMQE_POS_COUNT`, or `CMQE_POS_NONE`).
//
// # Safety
// `lid` and `pos` must each point to `n_tokens` values; `out` must be
// writable.
enum CmqeStatus cmqe_metrics(const uint8_t *lid,
                             const int32_t *pos,
                             size_t n_tokens,
                             struct CmqeMetrics *out);

// Half-up rounding of a raw prediction, clipped to the task's range.
//
// # Safety
// `out_label` must be writable.
enum CmqeStatus cmqe_round_clip(double prediction, uint32_t task, int64_t *out_label);

// Cohen's kappa of two label lists. `out_valid` is set to false (and
// `out_kappa` to 0) when kappa is undefined because both lists use one
// identical class.
//
// # Safety
// `gold` and `pred` must each point to `n` values; the outputs must be
// writable.
enum CmqeStatus cmqe_cohen_kappa(const int64_t *gold,
                                 const int64_t *pred,
                                 size_t n,
                                 double *out_kappa,
                                 bool *out_valid);

// Multi-class F1 with the given averaging (`CMQE_F1_*`).
//
// # Safety
// `gold` and `pred` must each point to `n` values; `out_f1` must be
// writable.
enum CmqeStatus cmqe_f1_score(const int64_t *gold,
                              const int64_t *pred,
                              size_t n,
                              uint32_t average,
                              double *out_f1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMQE_H */
