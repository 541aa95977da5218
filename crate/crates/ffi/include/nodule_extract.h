#ifndef NODULE_EXTRACT_H
#define NODULE_EXTRACT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NeStatus {
  NeStatus_Ok = 0,
  NeStatus_NullArgument = 1,
  NeStatus_InvalidUtf8 = 2,
  /**
   * A file could not be read or a model/table file is malformed.
   */
  NeStatus_Load = 3,
  /**
   * Input JSON is malformed or a document fails validation.
   */
  NeStatus_InvalidInput = 4,
  /**
   * Gold and predicted documents disagree (text, duplicate or missing ids).
   */
  NeStatus_Eval = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  NeStatus_Internal = 6,
} NeStatus;

/**
 * Opaque pipeline handle: a tagger, a linker and an optional TI-RADS table.
 */
typedef struct NePipeline NePipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a pipeline from a tagger model file. `linker_path` may be null
 * (nearest-anchor linking); `tirads_table` may be null (no scoring), the
 * string `builtin`, or a table file path.
 *
 * # Safety
 * String arguments must be null or valid NUL-terminated strings; `out`
 * must be a valid pointer.
 */
enum NeStatus ne_pipeline_load(const char *tagger_path,
                               const char *linker_path,
                               const char *tirads_table,
                               struct NePipeline **out);

/**
 * A pipeline that tags with a lexicon instead of a model. A null
 * `lexicon_path` selects the built-in lexicon.
 *
 * # Safety
 * As for [`ne_pipeline_load`].
 */
enum NeStatus ne_pipeline_load_lexicon(const char *lexicon_path,
                                       const char *linker_path,
                                       const char *tirads_table,
                                       struct NePipeline **out);

/**
 * # Safety
 * `pipeline` must be null or a handle from `ne_pipeline_load*` not yet freed.
 */
void ne_pipeline_free(struct NePipeline *pipeline);

/**
 * Runs the pipeline on one JSON document object and returns the extraction
 * as a JSON object.
 *
 * # Safety
 * `pipeline` must be a live handle; `document_json` a valid string; `out`
 * a valid pointer.
 */
enum NeStatus ne_extract_json(const struct NePipeline *pipeline,
                              const char *document_json,
                              char **out);

/**
 * Runs the pipeline on raw report text.
 *
 * # Safety
 * As for [`ne_extract_json`].
 */
enum NeStatus ne_extract_text(const struct NePipeline *pipeline,
                              const char *id,
                              const char *text,
                              char **out);

/**
 * Scores predicted against gold JSON-lines corpora. `endpoint_mode` is 0
 * for strict and 1 for lenient relation endpoints; relations are scored
 * when `relations` is non-zero. Returns the JSON report.
 *
 * # Safety
 * String arguments must be valid; `out` a valid pointer.
 */
enum NeStatus ne_eval_json(const char *gold_jsonl,
                           const char *pred_jsonl,
                           int32_t relations,
                           int32_t endpoint_mode,
                           int32_t strict_ids,
                           char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void ne_string_free(char *s);

/**
 * The message for the last failure on this thread, or null. Valid until the
 * next call into the library on the same thread; do not free.
 */
const char *ne_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *ne_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NODULE_EXTRACT_H */
