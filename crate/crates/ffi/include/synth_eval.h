#ifndef SYNTH_EVAL_H
#define SYNTH_EVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SeStatus {
  SE_STATUS_OK = 0,
  SE_STATUS_NULL_POINTER = 1,
  SE_STATUS_INVALID_UTF8 = 2,
  SE_STATUS_INVALID_ARGUMENT = 3,
  SE_STATUS_IO = 4,
  SE_STATUS_PARSE = 5,
  SE_STATUS_SCHEMA = 6,
  SE_STATUS_DEGENERATE = 7,
  SE_STATUS_NON_FINITE = 8,
  SE_STATUS_UNSUPPORTED = 9,
  SE_STATUS_PANIC = 10,
} SeStatus;

typedef enum SeClassifier {
  SE_CLASSIFIER_RANDOM_FOREST = 0,
  SE_CLASSIFIER_LOGISTIC = 1,
} SeClassifier;

typedef enum SeTest {
  SE_TEST_HOTELLING = 0,
  SE_TEST_FROBENIUS = 1,
  SE_TEST_MMD = 2,
} SeTest;

/**
 * A fitted generator.
 */
typedef struct SeGenerator SeGenerator;

/**
 * A loaded table.
 */
typedef struct SeTable SeTable;

typedef struct SePermutationResult {
  double observed;
  double p_value;
  double null_mean;
  double null_sd;
  uintptr_t permutations;
  bool reject;
} SePermutationResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call on the same thread.
 */
const char *se_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *se_version(void);

/**
 * Reads a CSV file. `label` and `schema_path` may be null.
 *
 * # Safety
 * String arguments must be null or nul-terminated; `out_table` must be
 * writable.
 */
enum SeStatus se_table_read_csv(const char *path,
                                const char *label,
                                const char *schema_path,
                                struct SeTable **out_table);

/**
 * Reads a CSV file using another table's schema, so that column kinds and
 * the label agree.
 *
 * # Safety
 * `like` must be a live table handle; see [`se_table_read_csv`].
 */
enum SeStatus se_table_read_csv_like(const char *path,
                                     const struct SeTable *like,
                                     struct SeTable **out_table);

/**
 * # Safety
 * `t` must be a live handle.
 */
enum SeStatus se_table_write_csv(const struct SeTable *t, const char *path);

/**
 * # Safety
 * `t` must be a live handle; outputs must be writable.
 */
enum SeStatus se_table_shape(const struct SeTable *t, uintptr_t *rows, uintptr_t *cols);

/**
 * Releases a table. Null is ignored.
 *
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void se_table_free(struct SeTable *t);

/**
 * Overall quality score in [0, 1].
 *
 * # Safety
 * Handles must be live; `score` must be writable.
 */
enum SeStatus se_quality_overall(const struct SeTable *real,
                                 const struct SeTable *synth,
                                 double *score);

/**
 * Overall diagnostic score in [0, 1].
 *
 * # Safety
 * Handles must be live; `score` must be writable.
 */
enum SeStatus se_diagnostic_overall(const struct SeTable *real,
                                    const struct SeTable *synth,
                                    double *score);

/**
 * Gate decision on two overall scores (inclusive thresholds).
 *
 * # Safety
 * `pass` must be writable.
 */
enum SeStatus se_gate(double quality,
                      double diagnostic,
                      double quality_threshold,
                      double diagnostic_threshold,
                      bool *pass);

/**
 * Real-vs-synthetic classification; writes ROC-AUC and the synthetic
 * class F1.
 *
 * # Safety
 * Handles must be live; outputs must be writable.
 */
enum SeStatus se_distinguishability(const struct SeTable *real,
                                    const struct SeTable *synth,
                                    enum SeClassifier classifier,
                                    uint64_t seed,
                                    double *roc_auc,
                                    double *f1);

/**
 * Permutation two-sample test on row-major `n1×p` and `n2×p` matrices.
 *
 * # Safety
 * `x` and `y` must hold `n1·p` and `n2·p` values; `result` must be
 * writable.
 */
enum SeStatus se_permutation_test(enum SeTest test,
                                  const double *x,
                                  uintptr_t n1,
                                  const double *y,
                                  uintptr_t n2,
                                  uintptr_t p,
                                  uintptr_t permutations,
                                  double alpha,
                                  uint64_t seed,
                                  struct SePermutationResult *result);

/**
 * Mean nearest/second-nearest distance ratio from `synth` rows to
 * `reference` rows.
 *
 * # Safety
 * Handles must be live; `score` must be writable.
 */
enum SeStatus se_nndr(const struct SeTable *synth, const struct SeTable *reference, double *score);

/**
 * `mean ln d_real + mean ln(1 − d_fake)` on clamped probabilities.
 *
 * # Safety
 * Arrays must hold the stated number of values.
 */
enum SeStatus se_vanilla_gan_risk(const double *d_real,
                                  uintptr_t n_real,
                                  const double *d_fake,
                                  uintptr_t n_fake,
                                  double *risk);

/**
 * Fits a per-class Gaussian-mixture sampler with `k` components.
 *
 * # Safety
 * `train` must be live; `out_gen` must be writable.
 */
enum SeStatus se_gmm_fit(const struct SeTable *train,
                         uintptr_t k,
                         double ridge,
                         uint64_t seed,
                         struct SeGenerator **out_gen);

/**
 * Loads a generator saved by the command-line tool.
 *
 * # Safety
 * `path` must be nul-terminated; `out_gen` must be writable.
 */
enum SeStatus se_generator_load(const char *path, struct SeGenerator **out_gen);

/**
 * # Safety
 * `gen` must be live; `path` nul-terminated.
 */
enum SeStatus se_generator_save(const struct SeGenerator *gen, const char *path);

/**
 * Draws `n` rows; `uniform` selects equal class counts instead of the
 * training proportions.
 *
 * # Safety
 * `gen` must be live; `out_table` must be writable.
 */
enum SeStatus se_generator_sample(const struct SeGenerator *gen,
                                  uintptr_t n,
                                  bool uniform,
                                  uint64_t seed,
                                  struct SeTable **out_table);

/**
 * Releases a generator. Null is ignored.
 *
 * # Safety
 * `gen` must be null or a handle not yet freed.
 */
void se_generator_free(struct SeGenerator *gen);

/**
 * Runs the command-line tool with `argv[0..argc]` and returns its exit
 * code (64 on unusable arguments).
 *
 * # Safety
 * `argv` must point to `argc` nul-terminated strings.
 */
int se_cli_run(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYNTH_EVAL_H */
