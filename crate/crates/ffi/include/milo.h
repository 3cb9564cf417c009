/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef MILO_H
#define MILO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MiloStatus {
  MILO_STATUS_OK = 0,
  MILO_STATUS_INVALID_ARGUMENT = 1,
  MILO_STATUS_IO = 2,
  MILO_STATUS_PARSE = 3,
  MILO_STATUS_VALIDATION = 4,
  MILO_STATUS_MODEL = 5,
  MILO_STATUS_SIGNATURE = 6,
  MILO_STATUS_TRANSPORT = 7,
  MILO_STATUS_PANIC = 99,
} MiloStatus;

/*
 An imported or trained model.
 */
typedef struct MiloModel MiloModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *milo_version(void);

/*
 Message of the last failed call on this thread, or NULL. Owned by the
 library; valid until the next call on this thread.
 */
const char *milo_last_error(void);

/*
 Loads, validates and imports a model file.
 */
enum MiloStatus milo_model_load(const char *path, struct MiloModel **out);

/*
 Validates and imports a model document given as JSON text.
 */
enum MiloStatus milo_model_from_json(const char *json, struct MiloModel **out);

/*
 Exports `model` as indented JSON; free the result with `milo_string_free`.
 */
enum MiloStatus milo_model_to_json(const struct MiloModel *model, char **out);

enum MiloStatus milo_model_save(const struct MiloModel *model, const char *path);

/*
 Fits a new model on a row-major `n_rows` x `n_cols` matrix. `y` holds
 `n_rows` targets (class labels as integral values) and may be NULL only
 for KMeans.
 */
enum MiloStatus milo_model_train(const char *model_type,
                                 const double *x,
                                 size_t n_rows,
                                 size_t n_cols,
                                 const double *y,
                                 struct MiloModel **out);

/*
 Fits a new model on a CSV file with a header row. `target` may be NULL
 only for KMeans.
 */
enum MiloStatus milo_model_train_csv(const char *model_type,
                                     const char *csv_path,
                                     const char *target,
                                     struct MiloModel **out);

/*
 Writes `n_rows` predictions into `out`; class and cluster labels are
 returned as integral doubles.
 */
enum MiloStatus milo_model_predict(const struct MiloModel *model,
                                   const double *x,
                                   size_t n_rows,
                                   size_t n_cols,
                                   double *out);

/*
 The model's type name; owned by the handle.
 */
const char *milo_model_type(const struct MiloModel *model);

enum MiloStatus milo_model_n_features(const struct MiloModel *model, size_t *out);

void milo_model_free(struct MiloModel *model);

/*
 Validates JSON text. `ok` receives the verdict; `report`, if not NULL,
 receives one finding per line (free with `milo_string_free`).
 */
enum MiloStatus milo_validate_json(const char *json, bool *ok, char **report);

/*
 Signs a model document with a 64-hex-character secret seed and returns
 the signed file text.
 */
enum MiloStatus milo_sign_json(const char *json, const char *secret_hex, char **out);

enum MiloStatus milo_verify_json(const char *signed_json, const char *public_hex, bool *valid);

void milo_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MILO_H */
