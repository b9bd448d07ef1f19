#ifndef CHAIN_IPF_H
#define CHAIN_IPF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ChainIpfStatus {
  CHAIN_IPF_STATUS_OK = 0,
  CHAIN_IPF_STATUS_NULL_POINTER = 1,
  CHAIN_IPF_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed model, dataset or trace text.
   */
  CHAIN_IPF_STATUS_SCHEMA = 3,
  /**
   * The model violates a structural rule.
   */
  CHAIN_IPF_STATUS_VALIDATION = 4,
  /**
   * A numerical failure during inference or fitting.
   */
  CHAIN_IPF_STATUS_NUMERICAL = 5,
  /**
   * The model/data combination is not supported by the requested fit.
   */
  CHAIN_IPF_STATUS_UNSUPPORTED = 6,
  CHAIN_IPF_STATUS_INVALID_ARGUMENT = 7,
  /**
   * A panic was caught at the boundary.
   */
  CHAIN_IPF_STATUS_PANIC = 8,
} ChainIpfStatus;

typedef enum ChainIpfObjective {
  CHAIN_IPF_OBJECTIVE_LIKELIHOOD = 0,
  CHAIN_IPF_OBJECTIVE_CONDITIONAL_LIKELIHOOD = 1,
} ChainIpfObjective;

typedef struct ChainIpfDataset ChainIpfDataset;

typedef struct ChainIpfGraph ChainIpfGraph;

typedef struct ChainIpfTrace ChainIpfTrace;

typedef struct ChainIpfFitOptions {
  size_t max_cycles;
  double tol;
  double potential_floor;
} ChainIpfFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *chain_ipf_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void chain_ipf_string_free(char *s);

/**
 * Default fit options: 500 cycles, tolerance 1e-7, no floor.
 */
struct ChainIpfFitOptions chain_ipf_fit_options_default(void);

/**
 * Parses and validates a JSON model.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_graph_from_json(const char *json, struct ChainIpfGraph **out);

/**
 * Serializes a model to JSON; free the result with `chain_ipf_string_free`.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_graph_to_json(const struct ChainIpfGraph *graph, char **out);

/**
 * # Safety
 * `graph` must be a live handle or NULL.
 */
void chain_ipf_graph_free(struct ChainIpfGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_graph_num_variables(const struct ChainIpfGraph *graph, size_t *out);

/**
 * `P(x)` for a full assignment of `len` state indices in variable order.
 *
 * # Safety
 * `graph` must be a live handle, `config` must point to `len` values and
 * `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_joint_probability(const struct ChainIpfGraph *graph,
                                                const size_t *config,
                                                size_t len,
                                                double *out);

/**
 * Parses a CSV dataset against the model's variables.
 *
 * # Safety
 * `graph` must be a live handle, `csv` NUL-terminated, `out` writable.
 */
enum ChainIpfStatus chain_ipf_dataset_from_csv(const struct ChainIpfGraph *graph,
                                               const char *csv,
                                               struct ChainIpfDataset **out);

/**
 * # Safety
 * `data` must be a live handle or NULL.
 */
void chain_ipf_dataset_free(struct ChainIpfDataset *data);

/**
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_dataset_len(const struct ChainIpfDataset *data, size_t *out);

/**
 * Weighted average log-likelihood of the data.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_log_likelihood(const struct ChainIpfGraph *graph,
                                             const struct ChainIpfDataset *data,
                                             double *out);

/**
 * Weighted average conditional log-likelihood (clamped cells conditioned on).
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_conditional_log_likelihood(const struct ChainIpfGraph *graph,
                                                         const struct ChainIpfDataset *data,
                                                         double *out);

/**
 * Fits the model by IPF. `options` may be NULL for defaults. The input
 * graph is not modified; the fitted model is available from the trace.
 *
 * # Safety
 * Handles must be live; `options` must be NULL or valid; `out` writable.
 */
enum ChainIpfStatus chain_ipf_fit(const struct ChainIpfGraph *graph,
                                  const struct ChainIpfDataset *data,
                                  enum ChainIpfObjective objective,
                                  const struct ChainIpfFitOptions *options,
                                  struct ChainIpfTrace **out);

/**
 * # Safety
 * `trace` must be a live handle or NULL.
 */
void chain_ipf_trace_free(struct ChainIpfTrace *trace);

/**
 * Number of trace entries (cycle 0 is the initial model).
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_trace_len(const struct ChainIpfTrace *trace, size_t *out);

/**
 * Objective after `cycle` cycles.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_trace_objective(const struct ChainIpfTrace *trace,
                                              size_t cycle,
                                              double *out);

/**
 * Whether the fit met its tolerance before the cycle limit.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_trace_converged(const struct ChainIpfTrace *trace, bool *out);

/**
 * Copy of the fitted model as a new graph handle.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_trace_graph(const struct ChainIpfTrace *trace,
                                          struct ChainIpfGraph **out);

/**
 * Trace as CSV (`cycle,objective,wall_ms,optimizer,seed`).
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum ChainIpfStatus chain_ipf_trace_to_csv(const struct ChainIpfTrace *trace, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHAIN_IPF_H */
