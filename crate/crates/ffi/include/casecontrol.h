#ifndef CASECONTROL_H
#define CASECONTROL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CC_OK 0

/**
 * A Rust panic was caught at the boundary.
 */
#define CC_ERR_PANIC 1

#define CC_ERR_INVALID_ARGUMENT 2

#define CC_ERR_IO 3

#define CC_ERR_MISSING_COLUMN 10

#define CC_ERR_NON_BINARY_OUTCOME 11

#define CC_ERR_NON_BINARY_TREATMENT 12

#define CC_ERR_PARSE_VALUE 13

#define CC_ERR_EMPTY_STRATUM 14

#define CC_ERR_ZERO_CELL 20

#define CC_ERR_ZERO_DENOMINATOR 21

#define CC_ERR_ZERO_RETRO_PROB 22

#define CC_ERR_OVERLAP_VIOLATION 23

#define CC_ERR_INVALID_POPULATION 24

#define CC_ERR_DEGENERATE_COLUMN 30

#define CC_ERR_SEPARATION 31

#define CC_ERR_SINGULAR 32

#define CC_ERR_NOT_CONVERGED 33

#define CC_ERR_PROBABILITY_OUT_OF_RANGE 34

#define CC_ERR_BOOTSTRAP_DEGENERATE 40

#define CC_DESIGN_CASE_CONTROL 1

#define CC_DESIGN_CASE_POPULATION 2

#define CC_METHOD_COMBINED 0

#define CC_METHOD_PLUGIN 1

#define CC_RESAMPLE_PLAIN 0

#define CC_RESAMPLE_STRATIFIED 1

/**
 * Attributable-risk curve with bootstrap diagnostics.
 */
typedef struct CcArResult CcArResult;

/**
 * A validated sample.
 */
typedef struct CcDataset CcDataset;

/**
 * β̂(y) estimates together with the relative-risk band.
 */
typedef struct CcRrResult CcRrResult;

typedef struct CcBetaEstimate {
  uint8_t y_stratum;
  double value;
  double se;
} CcBetaEstimate;

typedef struct CcBandRow {
  double p;
  double point;
  double lower;
  double upper;
} CcBandRow;

typedef struct CcArRow {
  double p;
  double point;
  double upper;
} CcArRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *cc_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *cc_last_error_message(void);

/**
 * Odds ratio of a 2×2 table of counts n[y][t].
 */
int32_t cc_odds_ratio_2x2(uint64_t y0t0, uint64_t y0t1, uint64_t y1t0, uint64_t y1t1, double *out);

/**
 * Builds a dataset from `n` rows: 0/1 arrays `y` and `t` and a row-major
 * `n × k` covariate matrix `x` (NULL when `k == 0`). Pass NaN as `h0` to use
 * the sample share of cases.
 */
int32_t cc_dataset_new(const uint8_t *y,
                       const uint8_t *t,
                       const double *x,
                       size_t n,
                       size_t k,
                       int32_t design_code,
                       double h0_value,
                       struct CcDataset **out);

/**
 * Reads a CSV file. Every column other than `y_col` and `t_col` is a
 * covariate; rows with missing fields are dropped.
 */
int32_t cc_dataset_from_csv(const char *path,
                            const char *y_col,
                            const char *t_col,
                            int32_t design_code,
                            double h0_value,
                            struct CcDataset **out);

/**
 * Number of rows, or 0 for a NULL handle.
 */
size_t cc_dataset_n(const struct CcDataset *ds);

size_t cc_dataset_n_cases(const struct CcDataset *ds);

void cc_dataset_free(struct CcDataset *ds);

/**
 * β̂(y) for every identified stratum and the relative-risk band over the
 * grid 0, step, …, pbar. NULL basis strings select the default basis.
 */
int32_t cc_rr(const struct CcDataset *ds,
              const char *pro_basis,
              const char *retro_basis,
              int32_t method,
              double alpha,
              double pbar,
              double step,
              struct CcRrResult **out);

/**
 * Number of β̂(y) estimates: 2 for case-control, 1 for case-population data.
 */
size_t cc_rr_n_estimates(const struct CcRrResult *res);

int32_t cc_rr_estimate(const struct CcRrResult *res, size_t i, struct CcBetaEstimate *out);

size_t cc_rr_band_len(const struct CcRrResult *res);

int32_t cc_rr_band_row(const struct CcRrResult *res, size_t i, struct CcBandRow *out);

void cc_rr_free(struct CcRrResult *res);

/**
 * Attributable-risk upper bound with bias-corrected bootstrap limits over
 * the grid 0, step, …, pbar using `b` replications seeded by `seed`.
 */
int32_t cc_ar(const struct CcDataset *ds,
              const char *pro_basis,
              const char *retro_basis,
              double alpha,
              double pbar,
              double step,
              size_t b,
              uint64_t seed,
              int32_t resample,
              struct CcArResult **out);

size_t cc_ar_len(const struct CcArResult *res);

int32_t cc_ar_row(const struct CcArResult *res, size_t i, struct CcArRow *out);

/**
 * Bootstrap replicates dropped because their refit failed.
 */
size_t cc_ar_failed_replicates(const struct CcArResult *res);

void cc_ar_free(struct CcArResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASECONTROL_H */
