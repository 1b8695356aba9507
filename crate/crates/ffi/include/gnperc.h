#ifndef GNPERC_H
#define GNPERC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GnStatus {
  GN_STATUS_OK = 0,
  GN_STATUS_NULL_POINTER = 1,
  GN_STATUS_DOMAIN = 2,
  GN_STATUS_INVALID_BOX = 3,
  GN_STATUS_TRUNCATED_TABLE = 4,
  GN_STATUS_INSUFFICIENT_POINTS = 5,
  GN_STATUS_UNSUPPORTED = 6,
  GN_STATUS_INFINITE_RANGE = 7,
  GN_STATUS_BRACKET = 8,
  GN_STATUS_FORMAT = 9,
  GN_STATUS_IO = 10,
  GN_STATUS_BUFFER_TOO_SMALL = 11,
  GN_STATUS_PANIC = 12,
} GnStatus;

typedef enum GnMetric {
  GN_METRIC_EUCLIDEAN_FREE = 0,
  GN_METRIC_TORUS = 1,
} GnMetric;

typedef enum GnTailKind {
  GN_TAIL_KIND_NONE = 0,
  /**
   * `coef · param^i` beyond the head.
   */
  GN_TAIL_KIND_GEOMETRIC = 1,
  /**
   * `coef · i^{-param}` beyond the head; closed forms only.
   */
  GN_TAIL_KIND_POWER_LAW = 2,
} GnTailKind;

typedef enum GnVariant {
  GN_VARIANT_REACH_UNION = 0,
  GN_VARIANT_BOOLEAN_OVERLAP = 1,
} GnVariant;

/**
 * Opaque GN graph.
 */
typedef struct GnGraph GnGraph;

/**
 * Opaque point set.
 */
typedef struct GnPointSet GnPointSet;

/**
 * Weight vector: explicit head `α_1..α_K` plus an optional tail.
 */
typedef struct GnAlpha {
  const double *head;
  size_t head_len;
  enum GnTailKind tail_kind;
  double tail_coef;
  double tail_param;
} GnAlpha;

typedef struct GnCI {
  double p_hat;
  double lower;
  double upper;
  uint64_t trials;
  double level;
} GnCI;

/**
 * Crossing experiment. A NaN `margin` selects the default buffer.
 */
typedef struct GnExperiment {
  struct GnAlpha alpha;
  size_t dim;
  enum GnVariant variant;
  double side;
  double density;
  double margin;
  uint64_t trials;
  uint64_t base_seed;
  size_t axis;
  double level;
} GnExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *gn_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 */
size_t gn_last_error_message(char *buf, size_t len);

/**
 * Sample a homogeneous Poisson process on the box `[lower, upper]`.
 */
enum GnStatus gn_points_sample(size_t dim,
                               const double *lower,
                               const double *upper,
                               double density,
                               uint64_t seed,
                               enum GnMetric metric_kind,
                               struct GnPointSet **out_points);

/**
 * Wrap `n` explicit points (`coords` holds `n * dim` values, point-major).
 */
enum GnStatus gn_points_from_coords(size_t dim,
                                    const double *lower,
                                    const double *upper,
                                    double density,
                                    const double *coords,
                                    size_t n,
                                    enum GnMetric metric_kind,
                                    struct GnPointSet **out_points);

size_t gn_points_len(const struct GnPointSet *points);

size_t gn_points_dim(const struct GnPointSet *points);

/**
 * Copy all coordinates into `buf`, which must hold `len * dim` values.
 */
enum GnStatus gn_points_copy_coords(const struct GnPointSet *points, double *buf, size_t buf_len);

void gn_points_free(struct GnPointSet *points);

/**
 * Build the GN graph of `points` under `alpha`.
 */
enum GnStatus gn_graph_build(const struct GnPointSet *points,
                             const struct GnAlpha *alpha,
                             enum GnVariant variant_kind,
                             struct GnGraph **out_graph);

size_t gn_graph_edge_count(const struct GnGraph *graph);

/**
 * Copy the undirected edges as `(u, v)` pairs, `u < v`, into `buf`,
 * which must hold `2 * edge_count` values.
 */
enum GnStatus gn_graph_copy_edges(const struct GnGraph *graph, size_t *buf, size_t buf_len);

/**
 * Component label of every point (the smallest index in its component)
 * and the largest component's share of all points. `labels` may be null.
 */
enum GnStatus gn_graph_components(const struct GnGraph *graph,
                                  size_t *labels,
                                  size_t labels_len,
                                  double *out_largest_fraction,
                                  size_t *out_component_count);

/**
 * Whether one component touches both faces of the inner box normal to
 * `axis`. `graph` must have been built from `points`.
 */
enum GnStatus gn_graph_crossing(const struct GnGraph *graph,
                                const struct GnPointSet *points,
                                const double *inner_lower,
                                const double *inner_upper,
                                size_t axis,
                                bool *out_crossing);

void gn_graph_free(struct GnGraph *graph);

/**
 * Wilson score interval for `successes` out of `trials`.
 */
enum GnStatus gn_wilson_ci(uint64_t successes, uint64_t trials, double level, struct GnCI *out_ci);

/**
 * `E[r(0)]`; `INFINITY` when the mean diverges.
 */
enum GnStatus gn_expected_range(const struct GnAlpha *alpha,
                                size_t dim,
                                double density,
                                double *out_value);

/**
 * `ñ(p_c)` and the bound `ñ√45` on the 2D critical multiplier.
 */
enum GnStatus gn_renorm_bound(double pc, size_t *out_n_tilde, double *out_bound);

/**
 * Probability `δ^d e^{-(3δ)^d}` that a `3δ` box is a banana box at unit
 * density.
 */
double gn_banana_prob(double delta, size_t dim);

/**
 * `δ₁` with `E[min(Poisson((1+δ₁)^d), c₂)] = c₁`.
 */
enum GnStatus gn_calibrate_delta1(size_t dim, double c1, uint32_t c2, double *out_delta1);

/**
 * Crossing probability of the experiment over `trials` independent windows.
 */
enum GnStatus gn_crossing_probability(const struct GnExperiment *spec, struct GnCI *out_ci);

/**
 * Probability that an `m`-gap of the unit-rate line process is unbridged
 * from the right, from `trials` windows of length `window`.
 */
enum GnStatus gn_p_unbridged(const struct GnAlpha *alpha,
                             double m,
                             uint64_t trials,
                             double window,
                             double density,
                             uint64_t seed,
                             double level,
                             struct GnCI *out_ci);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNPERC_H */
