#ifndef BSPLACE_H
#define BSPLACE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum BsStatus {
  BS_STATUS_OK = 0,
  // A required pointer argument was null.
  BS_STATUS_NULL_ARGUMENT = 1,
  // An argument was out of range or inconsistent.
  BS_STATUS_INVALID_ARGUMENT = 2,
  // File could not be read.
  BS_STATUS_IO = 3,
  // Malformed map raster or checkpoint.
  BS_STATUS_PARSE = 4,
  // A placement is outside the deployable set.
  BS_STATUS_NOT_DEPLOYABLE = 5,
  // Output buffer too small; the message names the required size.
  BS_STATUS_BUFFER_TOO_SMALL = 6,
  BS_STATUS_PANIC = 7,
} BsStatus;

// Metric selector for searches.
typedef enum BsMetric {
  BS_METRIC_COVERAGE = 0,
  BS_METRIC_CAPACITY = 1,
} BsMetric;

// Opaque trained policy.
typedef struct BsPolicy BsPolicy;

// Opaque site map.
typedef struct BsSiteMap BsSiteMap;

// Opaque pathloss twin with its prediction cache.
typedef struct BsTwin BsTwin;

// Mirrors the library's radio parameters.
typedef struct BsRadioConfig {
  double carrier_freq_hz;
  double tx_power_dbm;
  double coverage_threshold_dbm;
  double wall_loss_db;
  double excess_loss_cap_db;
  double min_distance_m;
  double noise_variance_w;
  double bandwidth_hz;
} BsRadioConfig;

typedef struct BsMetrics {
  double coverage;
  double capacity;
  double pathgain_w;
  uint64_t covered_cells;
  uint64_t r_cells;
} BsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL-terminated and
// truncated to `cap` bytes, into `buf`. Returns the full message length
// excluding the terminator; `buf` may be null to query the length.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t bs_last_error(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *bs_version(void);

// Default radio parameters for a given cell size in meters.
struct BsRadioConfig bs_radio_default(double cell_size_m);

// Synthetic city-block map.
//
// # Safety
// `out_map` must be a valid pointer.
enum BsStatus bs_sitemap_generate(uint64_t seed,
                                  uint32_t width,
                                  uint32_t height,
                                  double cell_size_m,
                                  double density,
                                  uint32_t building_min,
                                  uint32_t building_max,
                                  struct BsSiteMap **out_map);

// Map from an in-memory binary PGM raster (pixels >= 128 are buildings).
// The deployable and receiver masks may be null for the defaults.
//
// # Safety
// Each non-null buffer must hold its stated number of bytes.
enum BsStatus bs_sitemap_load_pgm(const uint8_t *raster,
                                  size_t raster_len,
                                  double cell_size_m,
                                  const uint8_t *deployable,
                                  size_t deployable_len,
                                  const uint8_t *receiver,
                                  size_t receiver_len,
                                  struct BsSiteMap **out_map);

// # Safety
// `map` must be null or a handle from this library, not yet freed.
void bs_sitemap_free(struct BsSiteMap *map);

// Width, height and content hash. Any output pointer may be null.
//
// # Safety
// `map` must be a live handle.
enum BsStatus bs_sitemap_info(const struct BsSiteMap *map,
                              uint32_t *width,
                              uint32_t *height,
                              uint64_t *map_id);

// Twin with the given radio parameters (null for the defaults of
// `cell_size_m`).
//
// # Safety
// `radio` must be null or valid; `out_twin` must be valid.
enum BsStatus bs_twin_new(const struct BsRadioConfig *radio,
                          double cell_size_m,
                          struct BsTwin **out_twin);

// # Safety
// `twin` must be null or a handle from this library, not yet freed.
void bs_twin_free(struct BsTwin *twin);

// Received power in watts at every cell (row-major) for a transmitter at
// `(i, j)`. `out_power` must hold `width * height` values.
//
// # Safety
// Handles must be live; `out_power` must point to `len` doubles.
enum BsStatus bs_pathloss(const struct BsTwin *twin,
                          const struct BsSiteMap *map,
                          uint32_t i,
                          uint32_t j,
                          double *out_power,
                          size_t len);

// Network metrics of `n` placements.
//
// # Safety
// Handles must be live; `coords` must hold `2 * n` values.
enum BsStatus bs_evaluate(const struct BsTwin *twin,
                          const struct BsSiteMap *map,
                          const uint32_t *coords_ij,
                          size_t n,
                          struct BsMetrics *out_metrics);

// Best single placement by full sweep of the deployable set.
//
// # Safety
// Handles must be live; `out_ij` must hold 2 values.
enum BsStatus bs_exhaustive_single(const struct BsTwin *twin,
                                   const struct BsSiteMap *map,
                                   enum BsMetric metric,
                                   uint32_t *out_ij,
                                   struct BsMetrics *out_metrics);

// `n` distinct deployable cells drawn uniformly at random with `seed`.
//
// # Safety
// `map` must be live; `out_ij` must hold `2 * cap` values.
enum BsStatus bs_heuristic(const struct BsSiteMap *map,
                           size_t n,
                           uint64_t seed,
                           uint32_t *out_ij,
                           size_t cap);

// Loads a trained policy checkpoint from a NUL-terminated UTF-8 path.
//
// # Safety
// `path` must be a valid C string; `out_policy` must be valid.
enum BsStatus bs_policy_load(const char *path, struct BsPolicy **out_policy);

// # Safety
// `policy` must be null or a handle from this library, not yet freed.
void bs_policy_free(struct BsPolicy *policy);

// Places `n` base stations greedily with the policy and reports the
// resulting metrics (may be null).
//
// # Safety
// Handles must be live; `out_ij` must hold `2 * cap` values.
enum BsStatus bs_policy_deploy(const struct BsPolicy *policy,
                               const struct BsTwin *twin,
                               const struct BsSiteMap *map,
                               size_t n,
                               uint32_t *out_ij,
                               size_t cap,
                               struct BsMetrics *out_metrics);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSPLACE_H */
