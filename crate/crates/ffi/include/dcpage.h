#ifndef DCPAGE_H
#define DCPAGE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum DcpStatus {
  DCP_STATUS_OK = 0,
  DCP_STATUS_NULL_POINTER = 1,
  DCP_STATUS_INVALID_ARGUMENT = 2,
  DCP_STATUS_PARSE = 3,
  DCP_STATUS_IO = 4,
  DCP_STATUS_DIMENSION_MISMATCH = 5,
  DCP_STATUS_REQUIRES_FINITE_SUM = 6,
  DCP_STATUS_BUDGET_EXHAUSTED = 7,
  DCP_STATUS_NUMERICAL = 8,
  DCP_STATUS_UNAVAILABLE = 9,
  DCP_STATUS_PANIC = 10,
} DcpStatus;

/**
 * Optimization method.
 */
typedef enum DcpMethod {
  DCP_METHOD_PAGE = 0,
  DCP_METHOD_DCA = 1,
  DCP_METHOD_SVRG = 2,
  DCP_METHOD_SAGA = 3,
  DCP_METHOD_SDCA = 4,
} DcpMethod;

typedef struct DcpDataset DcpDataset;

typedef struct DcpProblem DcpProblem;

typedef struct DcpTrace DcpTrace;

/**
 * Solver settings. Zero batch sizes, a non-positive `p` and a zero
 * `metric_every` select the defaults; a zero `budget_cap` means no cap.
 */
typedef struct DcpSolverConfig {
  uint64_t b;
  uint64_t b_small;
  double p;
  uint64_t epoch;
  double eta_shift;
  double epsilon;
  uint64_t max_iters;
  uint64_t budget_cap;
  uint64_t seed;
  bool early_stop;
  uint64_t metric_every;
  bool record_gap;
  /**
   * Charge `2b'` per correction step instead of `b'`.
   */
  bool count_evaluations;
} DcpSolverConfig;

/**
 * One iteration record; absent metrics are NaN.
 */
typedef struct DcpRecord {
  uint64_t t;
  uint64_t grad_count;
  uint64_t grad_evals;
  double f_value;
  double d_value;
  double gap_value;
  double step_norm;
  /**
   * 0 for a large-batch refresh, 1 for a correction step.
   */
  int32_t branch;
  double subproblem_residual;
} DcpRecord;

/**
 * Default batch sizes and complexity predictions; absent predictions are NaN.
 */
typedef struct DcpParameters {
  uint64_t b;
  uint64_t b_small;
  double p;
  bool feasible;
  double suggested_eta;
  double predicted_t;
  double predicted_budget;
} DcpParameters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dcp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dcp_version(void);

struct DcpSolverConfig dcp_solver_config_default(void);

/**
 * Reads a LIBSVM file.
 */
enum DcpStatus dcp_dataset_read_libsvm(const char *path, struct DcpDataset **out);

/**
 * Parses LIBSVM text.
 */
enum DcpStatus dcp_dataset_parse_libsvm(const char *text, struct DcpDataset **out);

enum DcpStatus dcp_dataset_synthetic_binary(size_t n,
                                            size_t d,
                                            double sparsity,
                                            double noise,
                                            uint64_t seed,
                                            struct DcpDataset **out);

enum DcpStatus dcp_dataset_synthetic_multiclass(size_t n,
                                                size_t d,
                                                size_t classes,
                                                double sparsity,
                                                double noise,
                                                uint64_t seed,
                                                struct DcpDataset **out);

/**
 * Number of examples (0 for a null handle).
 */
size_t dcp_dataset_len(const struct DcpDataset *ds);

size_t dcp_dataset_features(const struct DcpDataset *ds);

/**
 * Scales every feature to unit maximum magnitude.
 */
enum DcpStatus dcp_dataset_normalize(struct DcpDataset *ds);

void dcp_dataset_free(struct DcpDataset *ds);

/**
 * Binary problem over a copy of `ds`; labels {0,1} are mapped to {-1,+1}.
 * A non-positive `lambda` selects `1/n`.
 */
enum DcpStatus dcp_problem_binary(const struct DcpDataset *ds,
                                  double lambda,
                                  double alpha,
                                  double eta_shift,
                                  struct DcpProblem **out);

/**
 * Multi-class problem over a copy of `ds` with labels `1..=c`.
 */
enum DcpStatus dcp_problem_multiclass(const struct DcpDataset *ds,
                                      double lambda,
                                      double alpha,
                                      double eta_shift,
                                      struct DcpProblem **out);

size_t dcp_problem_dim(const struct DcpProblem *prob);

/**
 * `F(x)`.
 */
enum DcpStatus dcp_problem_objective(const struct DcpProblem *prob,
                                     const double *x,
                                     size_t len,
                                     double *out);

/**
 * Distance from `∇H(x) + ∇r2(x)` to `∂(G + r1)(x)`.
 */
enum DcpStatus dcp_problem_critical_distance(const struct DcpProblem *prob,
                                             const double *x,
                                             size_t len,
                                             double *out);

void dcp_problem_free(struct DcpProblem *prob);

/**
 * Runs `method` from `x0` (zeros when `x0` is null).
 */
enum DcpStatus dcp_solve(const struct DcpProblem *prob,
                         enum DcpMethod method,
                         const struct DcpSolverConfig *config,
                         const double *x0,
                         size_t len,
                         struct DcpTrace **out);

size_t dcp_trace_len(const struct DcpTrace *trace);

enum DcpStatus dcp_trace_record(const struct DcpTrace *trace, size_t index, struct DcpRecord *out);

/**
 * Copies the returned point into `buf` (which must hold `dim` values) and
 * its iterate index into `index` (may be null).
 */
enum DcpStatus dcp_trace_output(const struct DcpTrace *trace,
                                double *buf,
                                size_t len,
                                uint64_t *index);

/**
 * Trace as CSV text. Free the result with [`dcp_string_free`].
 */
char *dcp_trace_csv(const struct DcpTrace *trace);

void dcp_string_free(char *s);

void dcp_trace_free(struct DcpTrace *trace);

/**
 * Finite-sum defaults; pass NaN for `delta0` to skip the predictions.
 */
enum DcpStatus dcp_finite_sum_parameters(size_t n,
                                         double l_avg,
                                         double rho,
                                         double l_r2,
                                         double epsilon,
                                         double delta0,
                                         struct DcpParameters *out);

/**
 * Online defaults for gradient variance `sigma_sq`.
 */
enum DcpStatus dcp_online_parameters(double sigma_sq,
                                     double l_avg,
                                     double rho,
                                     double l_r2,
                                     double epsilon,
                                     double delta0,
                                     struct DcpParameters *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCPAGE_H */
