#ifndef SMMS_H
#define SMMS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SmmsMode {
  SMMS_MODE_QE = 0,
  SMMS_MODE_SOLITON = 1,
  SMMS_MODE_STATIC = 2,
  SMMS_MODE_RANK = 3,
} SmmsMode;

typedef enum SmmsStatus {
  SMMS_STATUS_OK = 0,
  SMMS_STATUS_DECISION_NO = 1,
  SMMS_STATUS_NOT_GENERIC = 2,
  SMMS_STATUS_INPUT_ERROR = 3,
  SMMS_STATUS_NULL_POINTER = 4,
  SMMS_STATUS_INVALID_UTF8 = 5,
  SMMS_STATUS_PANIC = 6,
} SmmsStatus;

// Opaque manifold handle.
typedef struct SmmsManifold SmmsManifold;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next call on the same thread.
const char *smms_last_error(void);

// Parses a manifold file given as TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum SmmsStatus smms_manifold_parse(const char *toml, struct SmmsManifold **out);

// # Safety
// `m` must come from [`smms_manifold_parse`] and not be used afterwards.
void smms_manifold_free(struct SmmsManifold *m);

// # Safety
// `m` must be a live handle or null.
uintptr_t smms_manifold_dimension(const struct SmmsManifold *m);

// # Safety
// `m` must be a live handle or null.
uintptr_t smms_manifold_point_count(const struct SmmsManifold *m);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void smms_string_free(char *s);

// Runs a pipeline over the file's sample points; the status mirrors the
// summary decision and `report` receives the JSON report.
//
// # Safety
// `m` must be a live handle and `report` a valid pointer.
enum SmmsStatus smms_check(const struct SmmsManifold *m, enum SmmsMode mode, char **report);

// # Safety
// `m` must be a live handle and `report` a valid pointer.
enum SmmsStatus smms_verify(const struct SmmsManifold *m, char **report);

// Integrates the file's `k` field along `path` (`x0,y0;x1,y1;…`).
//
// # Safety
// `m` must be a live handle, `path` a NUL-terminated string and `report` a
// valid pointer.
enum SmmsStatus smms_potential(const struct SmmsManifold *m, const char *path, char **report);

// # Safety
// `m` must be a live handle, `ms` point to `n_m` doubles and `report` be a
// valid pointer.
enum SmmsStatus smms_harnack(const struct SmmsManifold *m,
                             const double *ms,
                             uintptr_t n_m,
                             uintptr_t trials,
                             char **report);

// Quasi-Einstein pipeline at one point: writes the candidate `K` (covector,
// `dimension` entries) and `‖G‖`. Returns the point's decision as a status.
//
// # Safety
// `m` must be a live handle, `point` point to `dimension` doubles, `k_out`
// have room for `dimension` doubles and `g_norm` be valid.
enum SmmsStatus smms_qe_at(const struct SmmsManifold *m,
                           const double *point,
                           uintptr_t len,
                           double *k_out,
                           double *g_norm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMMS_H */
