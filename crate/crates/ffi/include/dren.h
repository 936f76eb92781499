/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DREN_H
#define DREN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum DrenStatus {
  DREN_STATUS_OK = 0,
  DREN_STATUS_NULL_POINTER = 1,
  DREN_STATUS_INVALID_INPUT = 2,
  DREN_STATUS_INVALID_CONFIG = 3,
  DREN_STATUS_TRAINING_DIVERGED = 4,
  DREN_STATUS_OPTIMIZATION_FAILURE = 5,
  DREN_STATUS_PARSE = 6,
  DREN_STATUS_CHECKPOINT = 7,
  DREN_STATUS_IO = 8,
  DREN_STATUS_BUFFER_TOO_SMALL = 9,
  DREN_STATUS_PANIC = 10,
  DREN_STATUS_INTERNAL = 11,
} DrenStatus;

typedef enum DrenDivergence {
  DREN_DIVERGENCE_KL = 0,
  DREN_DIVERGENCE_RENYI = 1,
  DREN_DIVERGENCE_WASSERSTEIN1_TV = 2,
} DrenDivergence;

typedef enum DrenHistMode {
  DREN_HIST_MODE_CONCAT = 0,
  DREN_HIST_MODE_HISTOGRAM_ONLY = 1,
} DrenHistMode;

/*
 A trained encoder.
 */
typedef struct DrenModel DrenModel;

/*
 Training options. Fill with [`dren_train_config_default`] and override.
 */
typedef struct DrenTrainConfig {
  double lambda;
  size_t embed_dim;
  enum DrenDivergence divergence;
  /*
   Used only with `DREN_DIVERGENCE_RENYI`.
   */
  double alpha;
  double perplexity;
  size_t batch_size;
  size_t epochs;
  double learning_rate;
  double val_fraction;
  uint64_t seed;
  bool histogram;
  size_t bins;
  enum DrenHistMode hist_mode;
} DrenTrainConfig;

/*
 t-SNE options. Fill with [`dren_tsne_config_default`] and override.
 */
typedef struct DrenTsneConfig {
  size_t embed_dim;
  double perplexity;
  size_t iterations;
  double learning_rate;
  uint64_t seed;
} DrenTsneConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *dren_version(void);

/*
 Message for the last failed call on this thread, or NULL after a success.
 The pointer stays valid until the next library call on this thread.
 */
const char *dren_last_error(void);

/*
 # Safety
 `out` must be null or point to writable memory for one config.
 */
enum DrenStatus dren_train_config_default(struct DrenTrainConfig *out);

/*
 # Safety
 `out` must be null or point to writable memory for one config.
 */
enum DrenStatus dren_tsne_config_default(struct DrenTsneConfig *out);

/*
 Train an encoder on `n × dim` features with labels `0..C`. On success
 `*out_model` owns a new handle.

 # Safety
 `features` must hold `n * dim` doubles, `labels` must hold `n` values and
 `out_model` must be writable.
 */
enum DrenStatus dren_train(const struct DrenTrainConfig *config,
                           const double *features,
                           size_t n,
                           size_t dim,
                           const uint32_t *labels_ptr,
                           struct DrenModel **out_model);

/*
 # Safety
 `model` must be null or a live handle.
 */
size_t dren_model_input_dim(const struct DrenModel *model);

/*
 # Safety
 `model` must be null or a live handle.
 */
size_t dren_model_embed_dim(const struct DrenModel *model);

/*
 # Safety
 `model` must be null or a live handle.
 */
size_t dren_model_classes(const struct DrenModel *model);

/*
 Embed `n × dim` features into `out` (`out_len ≥ n * embed_dim`).

 # Safety
 Buffers must hold the stated number of elements.
 */
enum DrenStatus dren_model_embed(const struct DrenModel *model_ptr,
                                 const double *features,
                                 size_t n,
                                 size_t dim,
                                 double *out,
                                 size_t out_len);

/*
 Softmax class predictions for `n × dim` features into `out` (`out_len ≥ n`).

 # Safety
 Buffers must hold the stated number of elements.
 */
enum DrenStatus dren_model_predict(const struct DrenModel *model_ptr,
                                   const double *features,
                                   size_t n,
                                   size_t dim,
                                   uint32_t *out,
                                   size_t out_len);

/*
 # Safety
 `path` must be a NUL-terminated UTF-8 string.
 */
enum DrenStatus dren_model_save(const struct DrenModel *model_ptr, const char *path_ptr);

/*
 # Safety
 `path` must be a NUL-terminated UTF-8 string and `out_model` writable.
 */
enum DrenStatus dren_model_load(const char *path_ptr, struct DrenModel **out_model);

/*
 Release a handle. NULL is ignored.

 # Safety
 `model` must be null or a handle not yet freed.
 */
void dren_model_free(struct DrenModel *model);

/*
 Exact t-SNE of `n × dim` features into `out` (`out_len ≥ n * embed_dim`).

 # Safety
 Buffers must hold the stated number of elements.
 */
enum DrenStatus dren_tsne_fit(const struct DrenTsneConfig *config,
                              const double *features,
                              size_t n,
                              size_t dim,
                              double *out,
                              size_t out_len);

/*
 Place test points in an existing embedding by reconstructing each from
 its `k` nearest training points. `out_len ≥ n_test * embed_dim`.

 # Safety
 Buffers must hold the stated number of elements.
 */
enum DrenStatus dren_oos_embed(const double *x_train,
                               const double *z_train,
                               size_t n_train,
                               size_t dim,
                               size_t embed_dim,
                               const double *x_test,
                               size_t n_test,
                               size_t k,
                               double *out,
                               size_t out_len);

/*
 Majority vote of the `k` nearest training embeddings. `out_len ≥ n_test`.

 # Safety
 Buffers must hold the stated number of elements.
 */
enum DrenStatus dren_knn_predict(const double *z_train,
                                 const uint32_t *y_train,
                                 size_t n_train,
                                 size_t embed_dim,
                                 const double *z_test,
                                 size_t n_test,
                                 size_t k,
                                 uint32_t *out,
                                 size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DREN_H */
