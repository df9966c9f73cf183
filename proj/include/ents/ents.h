/* Ensemble transport smoothing: C interface.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns an ents_status; on
 * failure ents_last_error() describes the problem for the calling thread.
 * Strings returned through char** out-parameters are released with
 * ents_string_free. Ensemble data is row-major: one row per member.
 */
#ifndef ENTS_ENTS_H
#define ENTS_ENTS_H

#include <stddef.h>
#include <stdint.h>

#if defined(ENTS_BUILDING_LIBRARY)
#define ENTS_API __attribute__((visibility("default")))
#else
#define ENTS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ents_status {
  ENTS_OK = 0,
  ENTS_ERR_INVALID_ARGUMENT = 1,
  ENTS_ERR_NOT_POSITIVE_DEFINITE = 2,
  ENTS_ERR_ENSEMBLE_COLLAPSE = 3,
  ENTS_ERR_INSUFFICIENT_MEMBERS = 4,
  ENTS_ERR_NON_FINITE = 5,
  ENTS_ERR_IO = 6,
  ENTS_ERR_CONFIG = 7,
  ENTS_ERR_INTERNAL = 99
} ents_status;

typedef struct ents_ensemble ents_ensemble;
typedef struct ents_map ents_map;

ENTS_API const char* ents_version(void);

/* Message of the last failed call on this thread; "" if none. */
ENTS_API const char* ents_last_error(void);

ENTS_API const char* ents_status_name(ents_status status);

ENTS_API void ents_string_free(char* s);

/* ---- ensembles ---- */

/* `data` is members x sum(dims). Block labels must be unique. */
ENTS_API ents_status ents_ensemble_create(const double* data, size_t members, const char* const* labels, const size_t* dims,
                                          size_t blocks, ents_ensemble** out);
ENTS_API void ents_ensemble_free(ents_ensemble* e);
ENTS_API ents_status ents_ensemble_shape(const ents_ensemble* e, size_t* members, size_t* dim, size_t* blocks);
/* Copies members x dim values into `out`, which must hold `capacity` doubles. */
ENTS_API ents_status ents_ensemble_data(const ents_ensemble* e, double* out, size_t capacity);
ENTS_API ents_status ents_ensemble_read_csv(const char* path, ents_ensemble** out);
ENTS_API ents_status ents_ensemble_write_csv(const ents_ensemble* e, const char* path);

/* ---- affine triangular maps ---- */

/* `pattern_json` maps a block label to the labels of earlier blocks it may
 * read, e.g. {"x": ["y"], "z": ["x"]}; blocks not listed read only
 * themselves. NULL selects the dense pattern. */
ENTS_API ents_status ents_map_fit(const ents_ensemble* e, const char* pattern_json, ents_map** out);
ENTS_API void ents_map_free(ents_map* m);
/* Reference samples z_i = C (w_i - mu). */
ENTS_API ents_status ents_map_forward(const ents_map* m, const ents_ensemble* e, ents_ensemble** out);
/* Composite-map conditioning of the blocks after the prefix `labels` on the
 * given values: `values` holds one row (per_member = 0) or one row per member
 * (per_member != 0) of the prefix dimension. */
ENTS_API ents_status ents_map_condition(const ents_map* m, const ents_ensemble* e, const char* const* labels, size_t nlabels,
                                        const double* values, size_t nvalues, int per_member, ents_ensemble** out);
ENTS_API ents_status ents_map_kl_objective(const ents_map* m, const ents_ensemble* e, double* out);
ENTS_API ents_status ents_map_to_json(const ents_map* m, char** out_json);

/* ---- experiments ---- */

/* Parses and validates a JSON config with JSON overrides (either may be NULL
 * or empty; overrides win) and returns the effective config as JSON. */
ENTS_API ents_status ents_config_resolve(const char* config_json, const char* overrides_json, char** out_json);

/* Runs the study and writes CSVs, summary.csv and manifest.json to the
 * configured output directory. The report lists cells, files and
 * failures. */
ENTS_API ents_status ents_experiment_run(const char* config_json, const char* overrides_json, char** report_json);

/* Both engines on shared random inputs for every smoother variant;
 * `all_ok` is set to 1 when every deviation is below `tolerance`. */
ENTS_API ents_status ents_equivalence(const char* model, size_t members, size_t steps, uint64_t seed, double tolerance,
                                      char** report_json, int* all_ok);

/* RTS recursion against the joint Gaussian oracle on an AR(1) twin. */
ENTS_API ents_status ents_oracle_check(size_t steps, uint64_t seed, char** report_json);

/* Runs the first smoother and ensemble size of the resolved config once and
 * writes the twin plus smoothed and filtering ensembles per time to `dir`. */
ENTS_API ents_status ents_export_ensembles(const char* config_json, const char* overrides_json, const char* dir,
                                           char** report_json);

#ifdef __cplusplus
}
#endif

#endif
