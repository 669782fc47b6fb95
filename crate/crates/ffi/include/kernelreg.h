#ifndef KERNELREG_H
#define KERNELREG_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum KrStatus {
  KR_STATUS_OK = 0,
  KR_STATUS_NULL_POINTER = 1,
  KR_STATUS_INVALID_ARGUMENT = 2,
  KR_STATUS_DOMAIN = 3,
  KR_STATUS_UNSUPPORTED = 4,
  KR_STATUS_NUMERICAL = 5,
  KR_STATUS_UNDEFINED_FIT = 6,
  KR_STATUS_IO = 7,
  KR_STATUS_PANIC = 8,
} KrStatus;

/**
 * Input/output data, optionally with the true impulse response.
 */
typedef struct KrDataset KrDataset;

/**
 * Result of tuning a family on a data set.
 */
typedef struct KrEstimate KrEstimate;

/**
 * A validated kernel specification.
 */
typedef struct KrKernel KrKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *kr_last_error(void);

/**
 * Parses a kernel spec from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KrStatus kr_kernel_from_json(const char *json, struct KrKernel **out);

/**
 * # Safety
 * `kernel` must come from `kr_kernel_from_json` or be null.
 */
void kr_kernel_free(struct KrKernel *kernel);

/**
 * Evaluates `k(t, s)`.
 *
 * # Safety
 * `kernel` and `out` must be valid pointers.
 */
enum KrStatus kr_kernel_eval(const struct KrKernel *kernel, size_t t, size_t s, double *out);

/**
 * Fills `out` (row-major, `len * len`) with the kernel matrix on `grid`.
 *
 * # Safety
 * `grid` must hold `len` entries and `out` room for `len * len` doubles.
 */
enum KrStatus kr_kernel_gram(const struct KrKernel *kernel,
                             const size_t *grid,
                             size_t len,
                             double *out);

/**
 * Creates a data set from `len` input and output samples.
 *
 * # Safety
 * `u` and `y` must each hold `len` doubles; `out` must be valid.
 */
enum KrStatus kr_dataset_new(const double *u, const double *y, size_t len, struct KrDataset **out);

/**
 * Attaches the true impulse response, enabling the fit score.
 *
 * # Safety
 * `dataset` must be valid and `g0` hold `len` doubles.
 */
enum KrStatus kr_dataset_set_g0(struct KrDataset *dataset, const double *g0, size_t len);

/**
 * # Safety
 * `dataset` must come from `kr_dataset_new` or be null.
 */
void kr_dataset_free(struct KrDataset *dataset);

/**
 * Tunes `family` on the data and estimates `taps` impulse-response
 * coefficients. The `oracle` family needs `g0` on the data set.
 *
 * # Safety
 * `family` must be NUL-terminated; `dataset` and `out` must be valid.
 */
enum KrStatus kr_estimate(const char *family,
                          const struct KrDataset *dataset,
                          size_t taps,
                          uint64_t seed,
                          struct KrEstimate **out);

/**
 * # Safety
 * `est` must come from `kr_estimate` or be null.
 */
void kr_estimate_free(struct KrEstimate *est);

/**
 * Number of estimated taps.
 *
 * # Safety
 * `est` must be valid or null (returns 0).
 */
size_t kr_estimate_len(const struct KrEstimate *est);

/**
 * Copies up to `len` estimated taps into `out`.
 *
 * # Safety
 * `est` must be valid and `out` hold `len` doubles.
 */
enum KrStatus kr_estimate_taps(const struct KrEstimate *est, double *out, size_t len);

/**
 * Tuned noise variance and negative log marginal likelihood.
 *
 * # Safety
 * All pointers must be valid.
 */
enum KrStatus kr_estimate_summary(const struct KrEstimate *est, double *sigma2, double *nll);

/**
 * Fit score against the true response; `UndefinedFit` when the data set
 * carried none.
 *
 * # Safety
 * `est` and `out` must be valid.
 */
enum KrStatus kr_estimate_fit(const struct KrEstimate *est, double *out);

/**
 * The whole result as JSON; release with `kr_string_free`.
 *
 * # Safety
 * `est` and `out` must be valid.
 */
enum KrStatus kr_estimate_to_json(const struct KrEstimate *est, char **out);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void kr_string_free(char *s);

/**
 * Runs the verification suite with default tolerances. `all_pass` receives
 * 1 when every check passed and 0 otherwise.
 *
 * # Safety
 * `all_pass` must be valid.
 */
enum KrStatus kr_verify(uint64_t seed, bool inject_fault, int32_t *all_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KERNELREG_H */
