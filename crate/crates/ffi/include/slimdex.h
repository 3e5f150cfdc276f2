#ifndef SLIMDEX_H
#define SLIMDEX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlimdexStatus {
  SLIMDEX_STATUS_OK = 0,
  SLIMDEX_STATUS_NULL_POINTER = 1,
  SLIMDEX_STATUS_INVALID_UTF8 = 2,
  SLIMDEX_STATUS_IO = 3,
  SLIMDEX_STATUS_FORMAT = 4,
  SLIMDEX_STATUS_INVALID_PARAMETER = 5,
  SLIMDEX_STATUS_DIMENSION_MISMATCH = 6,
  SLIMDEX_STATUS_UNKNOWN_ID = 7,
  SLIMDEX_STATUS_CHECKSUM = 8,
  SLIMDEX_STATUS_BUFFER_TOO_SMALL = 9,
  SLIMDEX_STATUS_PANIC = 10,
} SlimdexStatus;

typedef enum SlimdexMode {
  SLIMDEX_MODE_FLAT32 = 0,
  SLIMDEX_MODE_FLAT16 = 1,
  SLIMDEX_MODE_PQ = 2,
} SlimdexMode;

// Opaque filter-model handle.
typedef struct SlimdexFilter SlimdexFilter;

// Opaque index handle.
typedef struct SlimdexIndex SlimdexIndex;

// Build settings. `d_r = 0` keeps the input dimension without PCA;
// `n_v`/`n_b` are read only in PQ mode.
typedef struct SlimdexBuildConfig {
  enum SlimdexMode mode;
  size_t d_r;
  size_t n_v;
  uint8_t n_b;
  bool normalize;
  uint64_t seed;
} SlimdexBuildConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null if none.
// Valid until the next failing call on the same thread.
const char *slimdex_last_error_message(void);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SlimdexStatus slimdex_index_load(const char *path, struct SlimdexIndex **out);

// Builds an index from `n` row-major vectors of dimension `d`.
//
// # Safety
// `data` must hold `n * d` floats, `ids` `n` NUL-terminated strings.
enum SlimdexStatus slimdex_index_build(const float *data,
                                       size_t n,
                                       size_t d,
                                       const char *const *ids,
                                       const struct SlimdexBuildConfig *config,
                                       struct SlimdexIndex **out);

// # Safety
// `handle` must come from this library; `path` must be NUL-terminated.
enum SlimdexStatus slimdex_index_save(const struct SlimdexIndex *handle, const char *path);

// # Safety
// `handle` must come from this library and not be used afterwards. Null is ignored.
void slimdex_index_free(struct SlimdexIndex *handle);

// Number of stored vectors, 0 for a null handle.
//
// # Safety
// `handle` must be null or come from this library.
size_t slimdex_index_len(const struct SlimdexIndex *handle);

// Dimension queries must have, 0 for a null handle.
//
// # Safety
// `handle` must be null or come from this library.
size_t slimdex_index_dim(const struct SlimdexIndex *handle);

// Serialized size of the index in bytes.
//
// # Safety
// `handle` must come from this library; `out_bytes` must be valid.
enum SlimdexStatus slimdex_index_size_bytes(const struct SlimdexIndex *handle, uint64_t *out_bytes);

// Top-`k` search. Writes up to `k` row positions (use
// [`slimdex_index_id`] to get their ids) and scores, best first, and the
// number written to `out_count`.
//
// # Safety
// `query` must hold `query_len` floats; `out_positions` and `out_scores`
// must have room for `k` values.
enum SlimdexStatus slimdex_index_search(const struct SlimdexIndex *handle,
                                        const float *query,
                                        size_t query_len,
                                        size_t k,
                                        size_t *out_positions,
                                        double *out_scores,
                                        size_t *out_count);

// Copies the id of row `position` into `buf` as a NUL-terminated string.
// `out_len` receives the id length without the terminator; when `buf_len`
// is too small nothing is copied and `BufferTooSmall` is returned.
//
// # Safety
// `buf` must have room for `buf_len` bytes.
enum SlimdexStatus slimdex_index_id(const struct SlimdexIndex *handle,
                                    size_t position,
                                    char *buf,
                                    size_t buf_len,
                                    size_t *out_len);

// Serialized size of an index of `n` vectors of dimension `d` (no PCA,
// no normalization, empty ids), without building it.
//
// # Safety
// `out_bytes` must be valid.
enum SlimdexStatus slimdex_layout_size_bytes(enum SlimdexMode mode,
                                             uint64_t n,
                                             uint64_t d,
                                             uint64_t n_v,
                                             uint8_t n_b,
                                             uint64_t *out_bytes);

// # Safety
// `path` must be NUL-terminated and `out` valid.
enum SlimdexStatus slimdex_filter_load(const char *path, struct SlimdexFilter **out);

// # Safety
// `handle` must come from this library and not be used afterwards. Null is ignored.
void slimdex_filter_free(struct SlimdexFilter *handle);

// Margin of an article given its title and `n_categories` category strings;
// higher means more likely to hold answers.
//
// # Safety
// All strings must be NUL-terminated; `categories` must hold `n_categories` pointers.
enum SlimdexStatus slimdex_filter_score(const struct SlimdexFilter *handle,
                                        const char *title,
                                        const char *const *categories,
                                        size_t n_categories,
                                        double *out_score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLIMDEX_H */
