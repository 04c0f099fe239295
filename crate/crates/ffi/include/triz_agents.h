#ifndef TRIZ_AGENTS_H
#define TRIZ_AGENTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrizStatus {
  TRIZ_STATUS_OK = 0,
  TRIZ_STATUS_NULL_ARGUMENT = 1,
  TRIZ_STATUS_INVALID_UTF8 = 2,
  TRIZ_STATUS_INVALID_ARGUMENT = 3,
  TRIZ_STATUS_NOT_FOUND = 4,
  TRIZ_STATUS_BUFFER_TOO_SMALL = 5,
  TRIZ_STATUS_IO = 6,
  TRIZ_STATUS_RUN_ABORTED_LIMITS = 7,
  TRIZ_STATUS_RUN_ABORTED_BACKEND = 8,
  TRIZ_STATUS_PANIC = 9,
} TrizStatus;

/**
 * Opaque knowledge base handle.
 */
typedef struct TrizKb TrizKb;

/**
 * Opaque retrieval store handle.
 */
typedef struct TrizRag TrizRag;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *triz_version(void);

/**
 * Message for the last failure on this thread, or NULL. Free with
 * `triz_string_free`.
 */
char *triz_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void triz_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum TrizStatus triz_kb_load_bundled(struct TrizKb **out);

/**
 * Loads `parameters.tsv`, `principles.tsv` and `matrix.txt` from `dir`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TrizStatus triz_kb_load_dir(const char *dir, struct TrizKb **out);

/**
 * # Safety
 * `kb` must be NULL or a handle from `triz_kb_load_*`, freed once.
 */
void triz_kb_free(struct TrizKb *kb);

/**
 * # Safety
 * `kb` must be a live handle; the out pointers must be valid.
 */
enum TrizStatus triz_kb_counts(const struct TrizKb *kb, uint32_t *parameters, uint32_t *principles);

/**
 * Writes the principle ids of a matrix cell into `ids` (capacity `cap`)
 * and the cell size into `len`. An empty cell is `Ok` with `len` 0. If
 * `cap` is too small nothing is written except `len`.
 *
 * # Safety
 * `kb` must be a live handle, `ids` valid for `cap` elements (may be NULL
 * when `cap` is 0) and `len` valid.
 */
enum TrizStatus triz_kb_lookup(const struct TrizKb *kb,
                               uint32_t improving,
                               uint32_t worsening,
                               uint32_t *ids,
                               size_t cap,
                               size_t *len);

/**
 * Resolves a parameter id or case-insensitive name.
 *
 * # Safety
 * `kb` must be a live handle, `key` a NUL-terminated string, `id` valid.
 */
enum TrizStatus triz_kb_resolve_parameter(const struct TrizKb *kb, const char *key, uint32_t *id);

/**
 * # Safety
 * `kb` must be a live handle and `out` valid. Free the result with
 * `triz_string_free`.
 */
enum TrizStatus triz_kb_parameter_name(const struct TrizKb *kb, uint32_t id, char **out);

/**
 * A principle as a JSON object (`id`, `name`, `description`,
 * `sub_principles`).
 *
 * # Safety
 * `kb` must be a live handle and `out` valid. Free the result with
 * `triz_string_free`.
 */
enum TrizStatus triz_kb_principle_json(const struct TrizKb *kb, uint32_t id, char **out);

/**
 * An empty store. `chunk_size` and `overlap` of 0 pick the defaults.
 *
 * # Safety
 * `out` must be valid.
 */
enum TrizStatus triz_rag_new(size_t chunk_size, size_t overlap, struct TrizRag **out);

/**
 * A store holding the parameter and principle texts of `kb`.
 *
 * # Safety
 * `kb` must be a live handle and `out` valid.
 */
enum TrizStatus triz_rag_seeded(const struct TrizKb *kb, struct TrizRag **out);

/**
 * # Safety
 * `rag` must be NULL or a handle from `triz_rag_*`, freed once.
 */
void triz_rag_free(struct TrizRag *rag);

/**
 * # Safety
 * `rag` must be a live handle, the strings NUL-terminated, `chunks` NULL
 * or valid.
 */
enum TrizStatus triz_rag_ingest(struct TrizRag *rag,
                                const char *doc_id,
                                const char *body,
                                size_t *chunks);

/**
 * Ranked chunks as a JSON array of `{doc_id, chunk_index, text, score}`.
 *
 * # Safety
 * `rag` must be a live handle, `query` NUL-terminated and `out` valid.
 * Free the result with `triz_string_free`.
 */
enum TrizStatus triz_rag_query_json(const struct TrizRag *rag,
                                    const char *query,
                                    size_t k,
                                    char **out);

/**
 * Runs the workflow with the scripted backend and writes the run report
 * JSON to `report_json`.
 *
 * `search_fixture` may be NULL for an empty search fixture. With a NULL
 * `run_dir` the artifacts go to a temporary directory that is removed
 * afterwards. A run that aborts still fills `report_json` and returns
 * `RUN_ABORTED_LIMITS` or `RUN_ABORTED_BACKEND`.
 *
 * # Safety
 * String arguments must be NUL-terminated (or NULL where allowed) and
 * `report_json` valid. Free the result with `triz_string_free`.
 */
enum TrizStatus triz_run_scripted(const char *problem,
                                  const char *script_path,
                                  const char *search_fixture,
                                  const char *run_dir,
                                  char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRIZ_AGENTS_H */
