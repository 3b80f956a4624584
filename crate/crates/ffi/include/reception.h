#ifndef RECEPTION_H
#define RECEPTION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStage {
  RC_STAGE_PILOT = 0,
  RC_STAGE_TRIAGE = 1,
  RC_STAGE_EXHAUSTIVE = 2,
} RcStage;

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_POINTER = 1,
  RC_STATUS_INVALID_ARGUMENT = 2,
  // Input data was rejected (bad vector file, dimension mismatch, ...).
  RC_STATUS_DATA_ERROR = 3,
  RC_STATUS_IO = 4,
  // The result is mathematically undefined for this input.
  RC_STATUS_UNDEFINED = 5,
  // The output buffer is too small; the required length was written.
  RC_STATUS_BUFFER_TOO_SMALL = 6,
  RC_STATUS_PANIC = 7,
} RcStatus;

// Ranked search results owned by the library.
typedef struct RcHits RcHits;

// Exact inner-product index over unit vectors.
typedef struct RcIndex RcIndex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *rc_last_error(void);

// Library version as a static NUL-terminated string.
const char *rc_version(void);

// Writes the hash-trigram embedding of `text` into `out[0..dim]`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` must point to `dim`
// writable floats.
enum RcStatus rc_hash_embed(const char *text, size_t dim, float *out);

// Builds an index from `count` vectors of `dim` floats stored row-major
// in `values`, with ids `ids[0..count]`.
//
// # Safety
// `ids` must point to `count` NUL-terminated strings, `values` to
// `count * dim` floats and `out` to writable storage for one handle.
enum RcStatus rc_index_new(const char *const *ids,
                           const float *values,
                           size_t count,
                           size_t dim,
                           struct RcIndex **out);

// Loads an index from an RMV1 vector file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum RcStatus rc_index_load(const char *path, struct RcIndex **out);

// Number of vectors in the index; 0 for NULL.
//
// # Safety
// `index` must be NULL or a live handle from this library.
size_t rc_index_len(const struct RcIndex *index);

// Dimension of the index; 0 for NULL.
//
// # Safety
// `index` must be NULL or a live handle from this library.
size_t rc_index_dim(const struct RcIndex *index);

// Top-`k` search. Results are ranked by descending score with ties
// broken by id.
//
// # Safety
// `index` must be a live handle, `query` must point to `dim` floats and
// `out` must be writable.
enum RcStatus rc_index_search(const struct RcIndex *index,
                              const float *query,
                              size_t dim,
                              size_t k,
                              struct RcHits **out);

// # Safety
// `index` must be NULL or a handle not yet freed.
void rc_index_free(struct RcIndex *index);

// # Safety
// `hits` must be NULL or a live handle.
size_t rc_hits_len(const struct RcHits *hits);

// Id of the hit at `i`, or NULL when out of range. Owned by `hits`.
//
// # Safety
// `hits` must be NULL or a live handle.
const char *rc_hits_id(const struct RcHits *hits, size_t i);

// Score of the hit at `i`, or NaN when out of range.
//
// # Safety
// `hits` must be NULL or a live handle.
float rc_hits_score(const struct RcHits *hits, size_t i);

// # Safety
// `hits` must be NULL or a handle not yet freed.
void rc_hits_free(struct RcHits *hits);

// Spearman correlation of a 0/1 indicator with ranks, and its two-sided
// p-value. `RC_STATUS_UNDEFINED` for n < 3 or a constant input.
//
// # Safety
// `indicator` and `ranks` must point to `n` values; outputs must be
// writable.
enum RcStatus rc_spearman(const uint8_t *indicator,
                          const double *ranks,
                          size_t n,
                          double *out_rho,
                          double *out_p);

// Base-2 Jensen-Shannon divergence of two probability vectors.
//
// # Safety
// `p` and `q` must point to `n` values; `out` must be writable.
enum RcStatus rc_jsd(const double *p, const double *q, size_t n, double *out);

// Ranks to annotate at `stage` for a pool of `pool_size` hits. Writes up
// to `capacity` ranks into `out` and the full count into `out_len`;
// returns `RC_STATUS_BUFFER_TOO_SMALL` when `capacity` is short.
//
// # Safety
// `out` must point to `capacity` writable values (may be NULL when
// `capacity` is 0); `out_len` must be writable.
enum RcStatus rc_sampling_plan(enum RcStage stage,
                               size_t pool_size,
                               size_t *out,
                               size_t capacity,
                               size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECEPTION_H */
