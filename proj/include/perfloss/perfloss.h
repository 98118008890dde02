#ifndef PERFLOSS_PERFLOSS_H
#define PERFLOSS_PERFLOSS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PL_API __declspec(dllexport)
#else
#define PL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pl_status {
  PL_OK = 0,
  PL_ERR_INVALID_ARGUMENT,
  PL_ERR_OVERLAPPING_ANCHORS,
  PL_ERR_UNORDERED_ANCHORS,
  PL_ERR_ALL_RULES_SILENT,
  PL_ERR_EMPTY_DATASET,
  PL_ERR_NON_FINITE_GRADIENT,
  PL_ERR_UNMAPPED_COMBINATION,
  PL_ERR_UNKNOWN_FLOW,
  PL_ERR_UNKNOWN_SUPPORT,
  PL_ERR_INCONSISTENT_RELATIONS,
  PL_ERR_MISSING_OUTPUT_TERM,
  PL_ERR_CYCLE_DETECTED,
  PL_ERR_PORT_MISMATCH,
  PL_ERR_DANGLING_EDGE,
  PL_ERR_UNKNOWN_TARGET,
  PL_ERR_PARSE,
  PL_ERR_ARITY_MISMATCH,
  PL_ERR_IO,
  PL_ERR_VALIDATION,
  PL_ERR_INTERNAL = 100
} pl_status;

/* A parsed, validated system model. */
typedef struct pl_model pl_model;

typedef enum pl_train_mode { PL_TRAIN_FROM_FILE = -1, PL_TRAIN_LSE_ONLY = 0, PL_TRAIN_HYBRID = 1 } pl_train_mode;

/* Negative numbers and NaN keep the value from the model file. */
typedef struct pl_train_options {
  pl_train_mode mode;
  int epochs;
  double threshold;
  double rate;
  int has_seed;
  uint64_t seed;
  int synthesize; /* synthesize data for outputs without a dataset */
} pl_train_options;

/* Message of the last failed call on this thread; never NULL. */
PL_API const char* pl_last_error(void);
PL_API const char* pl_status_name(pl_status status);
/* Strings returned through char** out-parameters. */
PL_API void pl_string_free(char* s);

/* Runs every structural check. *report receives the diagnostics, one per line. */
PL_API pl_status pl_validate_file(const char* path, char** report);

PL_API pl_status pl_model_load(const char* path, pl_model** out);
PL_API void pl_model_free(pl_model* model);

PL_API pl_status pl_model_rule_report(const pl_model* model, char** report);

PL_API size_t pl_model_boundary_count(const pl_model* model);
PL_API const char* pl_model_boundary_name(const pl_model* model, size_t i);
PL_API size_t pl_model_flow_count(const pl_model* model);
PL_API const char* pl_model_flow_name(const pl_model* model, size_t i);

/* Evaluates the system. Every boundary input must be named exactly once;
 * flows_out receives pl_model_flow_count() values in evaluation order. */
PL_API pl_status pl_model_infer(const pl_model* model, const char* const* names, const double* values,
                                size_t count, double* flows_out);

/* Writes the synthetic dataset of one output flow as CSV. */
PL_API pl_status pl_model_synthesize(const pl_model* model, const char* flow, const uint64_t* seed,
                                     const char* out_path);

/* Registers a CSV dataset for one output flow, used by the next training call. */
PL_API pl_status pl_model_set_dataset(pl_model* model, const char* flow, const char* path);

PL_API void pl_train_options_init(pl_train_options* options);
/* Trains every output. Outputs without a registered dataset need options->synthesize.
 * *report lists RMSE per flow. */
PL_API pl_status pl_model_train(pl_model* model, const pl_train_options* options, char** report);

PL_API pl_status pl_model_save(const pl_model* model, const char* path);

/* Runs a scenario file and writes the CSV time series. */
PL_API pl_status pl_model_simulate(const pl_model* model, const char* scenario_path, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif
