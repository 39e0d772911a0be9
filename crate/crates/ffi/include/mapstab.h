#ifndef MAPSTAB_H
#define MAPSTAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum {
  MAPSTAB_STATUS_OK = 0,
  /*
   A required pointer was null.
   */
  MAPSTAB_STATUS_NULL_ARGUMENT = 1,
  /*
   A string argument was not UTF-8.
   */
  MAPSTAB_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed input data or JSON.
   */
  MAPSTAB_STATUS_FORMAT = 3,
  /*
   An invalid parameter value.
   */
  MAPSTAB_STATUS_PARAMETER = 4,
  /*
   Values outside the filter range, dimension or index mismatches.
   */
  MAPSTAB_STATUS_RANGE = 5,
  /*
   Two functions that do not share a cover or a domain.
   */
  MAPSTAB_STATUS_MISMATCH = 6,
  /*
   Exhaustive enumeration refused as too large.
   */
  MAPSTAB_STATUS_GUARD_EXCEEDED = 7,
  MAPSTAB_STATUS_IO = 8,
  /*
   A bug in the library; the message has details.
   */
  MAPSTAB_STATUS_PANIC = 9,
} MapstabStatus;

/*
 A point cloud.
 */
typedef struct MapstabCloud MapstabCloud;

/*
 A Mapper function: per-bin clusterings on a cover.
 */
typedef struct MapstabFunction MapstabFunction;

/*
 Distance between two Mapper functions.
 */
typedef struct {
  /*
   Mismatched points over common points.
   */
  double distance;
  uint64_t mismatched;
  uint64_t n_points;
  uint64_t lower_bound;
  uint64_t nodes;
  /*
   0 when a node budget stopped the search; `distance` is then an upper bound.
   */
  uint8_t exact;
} MapstabDistance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread. Valid until the next
 failing call on the same thread; never null.
 */
const char *mapstab_last_error(void);

/*
 Library version as a static string.
 */
const char *mapstab_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not be freed twice.
 */
void mapstab_string_free(char *s);

/*
 Cloud of `n` points of dimension `dim` from row-major coordinates.

 # Safety
 `coords` must point to `n * dim` doubles; `out` must be writable.
 */
MapstabStatus mapstab_cloud_from_rows(const double *coords,
                                      size_t n,
                                      size_t dim,
                                      MapstabCloud **out);

/*
 Reads a cloud from a `.csv`, `.txt` or `.json` file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
MapstabStatus mapstab_cloud_load(const char *path, bool header, MapstabCloud **out);

/*
 Draws a synthetic cloud from a JSON generator spec such as
 `{"kind":"circles","n":5000,"seed":1}`.

 # Safety
 `spec_json` must be a NUL-terminated string; `out` must be writable.
 */
MapstabStatus mapstab_cloud_generate(const char *spec_json, MapstabCloud **out);

/*
 Number of points; 0 for null.

 # Safety
 `cloud` must be null or a live handle.
 */
size_t mapstab_cloud_len(const MapstabCloud *cloud);

/*
 Dimension; 0 for null.

 # Safety
 `cloud` must be null or a live handle.
 */
size_t mapstab_cloud_dim(const MapstabCloud *cloud);

/*
 Releases a cloud. Null is ignored.

 # Safety
 `cloud` must come from this library and not be freed twice.
 */
void mapstab_cloud_free(MapstabCloud *cloud);

/*
 Builds the Mapper function of `cloud` under JSON Mapper parameters.

 # Safety
 `cloud` must be a live handle, `params_json` a NUL-terminated string and
 `out` writable.
 */
MapstabStatus mapstab_mapper_build(const MapstabCloud *cloud,
                                   const char *params_json,
                                   MapstabFunction **out);

/*
 Reads a function serialized by [`mapstab_function_to_json`] or the CLI.

 # Safety
 `function_json` must be a NUL-terminated string; `out` must be writable.
 */
MapstabStatus mapstab_function_from_json(const char *function_json, MapstabFunction **out);

/*
 Serializes a function.

 # Safety
 `f` must be a live handle; `out` must be writable.
 */
MapstabStatus mapstab_function_to_json(const MapstabFunction *f, char **out);

/*
 Nerve of a function up to simplices of dimension `max_dim`, as JSON.

 # Safety
 `f` must be a live handle; `out` must be writable.
 */
MapstabStatus mapstab_function_graph_json(const MapstabFunction *f, size_t max_dim, char **out);

/*
 Number of bins; 0 for null.

 # Safety
 `f` must be null or a live handle.
 */
size_t mapstab_function_n_bins(const MapstabFunction *f);

/*
 Releases a function. Null is ignored.

 # Safety
 `f` must come from this library and not be freed twice.
 */
void mapstab_function_free(MapstabFunction *f);

/*
 Distance between two functions on the same cover and domain.
 `max_nodes` bounds the search; 0 means no bound.

 # Safety
 `f` and `g` must be live handles; `out` must be writable.
 */
MapstabStatus mapstab_distance(const MapstabFunction *f,
                               const MapstabFunction *g,
                               uint64_t max_nodes,
                               MapstabDistance *out);

/*
 Instability of `cloud` under JSON Mapper and resampling parameters
 (`{"estimator":"kfold","k":10,"seed":0}`). Writes the mean over repeats
 and its standard deviation; either pointer may be null.

 # Safety
 `cloud` must be a live handle and both strings NUL-terminated.
 */
MapstabStatus mapstab_instability(const MapstabCloud *cloud,
                                  const char *params_json,
                                  const char *instability_json,
                                  double *mean,
                                  double *std);

/*
 Instability over a parameter grid. `axes_json` is an array of
 `{"parameter":"epsilon","values":[...]}`. Writes the grid as JSON, with
 its local minima when there are two axes.

 # Safety
 `cloud` must be a live handle, the strings NUL-terminated and `out`
 writable.
 */
MapstabStatus mapstab_sweep(const MapstabCloud *cloud,
                            const char *params_json,
                            const char *instability_json,
                            const char *axes_json,
                            char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPSTAB_H */
