/*
 * C interface to the topoclinic library.
 *
 * Every fallible call returns a tc_status. On failure a human-readable
 * message for the calling thread is available from tc_last_error() until the
 * next failing call on that thread. Handles are opaque and owned by the
 * caller; release them with the matching *_destroy function. Strings returned
 * through char** out-parameters are released with tc_string_free().
 */
#ifndef TOPOCLINIC_H
#define TOPOCLINIC_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(TOPOCLINIC_BUILDING)
#    define TOPOCLINIC_API __declspec(dllexport)
#  else
#    define TOPOCLINIC_API __declspec(dllimport)
#  endif
#else
#  define TOPOCLINIC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tc_status {
    TC_OK = 0,
    TC_ERR_PARSE = 1,
    TC_ERR_SCHEMA = 2,
    TC_ERR_DUPLICATE_ID = 3,
    TC_ERR_TRANSPORT = 4,
    TC_ERR_RATE_LIMITED = 5,
    TC_ERR_EMPTY_COMPLETION = 6,
    TC_ERR_SCRIPT_EXHAUSTED = 7,
    TC_ERR_NO_MATCH = 8,
    TC_ERR_CACHE_CORRUPT = 9,
    TC_ERR_MISSING_BINDING = 10,
    TC_ERR_MISSING_MARKER = 11,
    TC_ERR_MALFORMED_JUDGMENT = 12,
    TC_ERR_EMPTY_INPUT = 13,
    TC_ERR_INVALID_SCORE = 14,
    TC_ERR_UNKNOWN_CASE_ID = 15,
    TC_ERR_MISSING_BASELINE = 16,
    TC_ERR_CONFIG = 17,
    TC_ERR_METADATA_MISMATCH = 18,
    TC_ERR_INCOMPLETE_ARTIFACTS = 19,
    TC_ERR_DATASET_MISMATCH = 20,
    TC_ERR_IO = 21,
    TC_ERR_INVALID_ARGUMENT = 22,
    TC_ERR_INTERNAL = 99
} tc_status;

typedef struct tc_config tc_config;
typedef struct tc_corpus tc_corpus;
typedef struct tc_synonyms tc_synonyms;

typedef struct tc_run_outcome {
    size_t episodes_total;    /* cases x topologies */
    size_t episodes_executed; /* by this call */
    size_t failed_episodes;   /* in the finished artifacts */
    int complete;             /* 1 when episodes are finished and scored */
} tc_run_outcome;

TOPOCLINIC_API const char* tc_version(void);
TOPOCLINIC_API const char* tc_status_name(tc_status status);
TOPOCLINIC_API const char* tc_last_error(void);
TOPOCLINIC_API void tc_string_free(char* s);

/* --- Run configuration ---------------------------------------------------
 * Created with defaults; base-url and api-key are seeded from the
 * TOPOCLINIC_BASE_URL and TOPOCLINIC_API_KEY environment variables.
 *
 * Keys: dataset, format (canonical-json | upstream-adapter), topologies
 * (comma list), model, judge-model, scorer (llm | exact), templates,
 * synonyms, cases (comma list of ids), provider (live | scripted), script,
 * temperature, max-tokens, out, concurrency, rpm, cache, base-url, api-key,
 * max-attempts, stop-after (simulated crash after N episodes).
 */
TOPOCLINIC_API tc_status tc_config_create(tc_config** out);
TOPOCLINIC_API void tc_config_destroy(tc_config* config);
TOPOCLINIC_API tc_status tc_config_set(tc_config* config, const char* key, const char* value);

/* --- Experiment lifecycle ------------------------------------------------
 * For resume and score, `overrides` may be NULL. Keys explicitly set on it
 * that are part of the run identity must match the stored run
 * (TC_ERR_METADATA_MISMATCH).
 */
TOPOCLINIC_API tc_status tc_run(const tc_config* config, tc_run_outcome* outcome);
TOPOCLINIC_API tc_status tc_resume(const char* out_dir, const tc_config* overrides,
                                   tc_run_outcome* outcome);
TOPOCLINIC_API tc_status tc_score(const char* out_dir, const tc_config* overrides,
                                  tc_run_outcome* outcome);
/* format: "markdown" or "csv". */
TOPOCLINIC_API tc_status tc_report(const char* out_dir, const char* format);
/* Writes a markdown table to *out_table (free with tc_string_free). */
TOPOCLINIC_API tc_status tc_compare(const char* const* dirs, size_t n_dirs, char** out_table);

/* --- Corpus ---------------------------------------------------------------- */
TOPOCLINIC_API tc_status tc_corpus_load(const char* path, const char* format, tc_corpus** out);
TOPOCLINIC_API size_t tc_corpus_size(const tc_corpus* corpus);
TOPOCLINIC_API size_t tc_corpus_category_count(const tc_corpus* corpus);
/* Canonical JSON serialization (free with tc_string_free). */
TOPOCLINIC_API tc_status tc_corpus_serialize(const tc_corpus* corpus, char** out);
TOPOCLINIC_API void tc_corpus_destroy(tc_corpus* corpus);

/* --- Adjudication -------------------------------------------------------- */
TOPOCLINIC_API tc_status tc_synonyms_load(const char* path, tc_synonyms** out);
TOPOCLINIC_API void tc_synonyms_destroy(tc_synonyms* table);
/* `table` may be NULL for an empty table. */
TOPOCLINIC_API tc_status tc_judge_exact(const char* prediction, const char* truth,
                                        const tc_synonyms* table, int* out_score);
TOPOCLINIC_API tc_status tc_parse_judge_output(const char* text, int* out_score);
TOPOCLINIC_API tc_status tc_normalize_text(const char* text, char** out);

/* --- Metrics --------------------------------------------------------------- */
TOPOCLINIC_API tc_status tc_diagnostic_accuracy(const int* scores, size_t n, double* out_pct);
/* hits[i] != 0 counts as a hit. */
TOPOCLINIC_API tc_status tc_reasoning_recall(const int* hits, size_t n, double* out_pct);
TOPOCLINIC_API double tc_reasoning_gap(double recall_pct, double accuracy_pct);

#ifdef __cplusplus
}
#endif

#endif /* TOPOCLINIC_H */
