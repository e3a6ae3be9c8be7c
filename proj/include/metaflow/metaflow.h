/* metaflow — C API for the workflow meta-optimization engine.
 *
 * All functions return mf_status; MF_OK (0) on success. Output strings
 * are heap-allocated UTF-8 and must be released with mf_string_free().
 * Handles are opaque; a handle's last error message is retrievable via
 * mf_engine_last_error() until the next call on that handle.
 */
#ifndef METAFLOW_H
#define METAFLOW_H

#include <stddef.h>

#if defined(_WIN32)
#define MF_API __declspec(dllexport)
#else
#define MF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mf_engine mf_engine;

typedef enum mf_status {
    MF_OK = 0,
    MF_E_UNKNOWN = 1,
    /* workflow DSL */
    MF_E_SYNTAX = 10,
    MF_E_UNKNOWN_NODE_KIND = 11,
    MF_E_DANGLING_REFERENCE = 12,
    MF_E_UNBOUNDED_LOOP = 13,
    MF_E_INVALID_PROGRAM = 14,
    /* execution */
    MF_E_BUDGET_EXCEEDED = 20,
    MF_E_BACKEND_ERROR = 21,
    MF_E_EXTRACTION_FAILED = 22,
    /* gateway */
    MF_E_TRANSPORT = 30,
    MF_E_RATE_LIMITED = 31,
    MF_E_AUTH = 32,
    MF_E_SCRIPT_MISS = 33,
    MF_E_MALFORMED_OUTPUT = 34,
    /* corpus */
    MF_E_FORMAT = 40,
    MF_E_DUPLICATE_ID = 41,
    MF_E_TOO_FEW_TASKS = 42,
    MF_E_BAD_K = 43,
    MF_E_EMBED_BACKEND = 44,
    /* evaluation */
    MF_E_EMPTY_SUBTASK = 50,
    MF_E_EXTERNAL_EVALUATOR_MISSING = 51,
    /* storage */
    MF_E_STORAGE = 60,
    MF_E_NO_SCORED_ENTRY = 61,
    MF_E_CORRUPT_RUN = 62,
    /* configuration */
    MF_E_CONFIG = 70,
    MF_E_IO = 71,
    /* C API misuse (null handle or argument) */
    MF_E_INVALID_ARGUMENT = 80
} mf_status;

/* Stable short name for a status code ("ok", "syntax", ...). Static
 * storage; do not free. */
MF_API const char* mf_status_name(mf_status status);

/* ---- engine lifecycle ------------------------------------------------ */

/* config_json is the full engine configuration (see README). */
MF_API mf_status mf_engine_create(const char* config_json, mf_engine** out);
MF_API void mf_engine_destroy(mf_engine* engine);

/* Message of the most recent failure on this handle; empty string if the
 * last call succeeded. Owned by the handle; do not free. */
MF_API const char* mf_engine_last_error(const mf_engine* engine);

/* Diagnostic for the most recent mf_engine_create() failure on this
 * thread (creation failures have no handle to ask). Empty string if the
 * last create succeeded. Thread-local static storage; do not free. */
MF_API const char* mf_create_error(void);

/* Run id the engine derived from (or was given in) its config. Owned by
 * the handle; do not free. */
MF_API const char* mf_engine_run_id(const mf_engine* engine);

/* ---- commands (results are JSON documents) --------------------------- */

MF_API mf_status mf_engine_cluster(mf_engine* engine, char** result_json);
MF_API mf_status mf_engine_optimize(mf_engine* engine, char** result_json);
/* run_id may be NULL to use the engine's own run id; no_adapt != 0
 * evaluates the unadapted global workflow (ablation). */
MF_API mf_status mf_engine_adapt_eval(mf_engine* engine, const char* run_id, int no_adapt,
                                      char** result_json);
MF_API mf_status mf_engine_report(mf_engine* engine, const char* run_id, char** result_json);

/* ---- workflow DSL helpers (no engine handle needed) ------------------ */

/* Parse + validate + canonically re-render a workflow program. On
 * failure, *rendered_out receives the diagnostic message. loop_cap <= 0
 * selects the default verify_loop round cap. */
MF_API mf_status mf_program_roundtrip(const char* source, int loop_cap, char** rendered_out);

/* Validate only; *violations_json receives a JSON array of
 * {node, message} objects (empty array when the program is valid). */
MF_API mf_status mf_program_validate(const char* source, int loop_cap, char** violations_json);

/* The built-in seed workflow, in canonical DSL text. */
MF_API mf_status mf_seed_program(char** source_out);

MF_API void mf_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* METAFLOW_H */
