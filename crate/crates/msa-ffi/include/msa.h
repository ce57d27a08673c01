/* C interface of the finite many-sorted algebra engine. */

#ifndef MSA_H
#define MSA_H

/* Generated by cbindgen from the msa-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes of every entry point.
 */
typedef enum MsaStatus {
  MSA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MSA_STATUS_NULL_ARGUMENT = 1,
  /**
   * An input string was not valid UTF-8.
   */
  MSA_STATUS_INVALID_UTF8 = 2,
  /**
   * The instance text did not parse or validate.
   */
  MSA_STATUS_PARSE_ERROR = 3,
  /**
   * The requested check ran and at least one verdict failed.
   */
  MSA_STATUS_CHECK_FAILED = 4,
  /**
   * An argument value was not recognized.
   */
  MSA_STATUS_INVALID_ARGUMENT = 5,
  /**
   * The construction could not be carried out.
   */
  MSA_STATUS_CONSTRUCT_ERROR = 6,
  /**
   * An internal invariant was violated.
   */
  MSA_STATUS_INTERNAL = 7,
} MsaStatus;

/**
 * An opaque, fully validated instance.
 */
typedef struct MsaInstance MsaInstance;

/**
 * Generator configuration; the caps match the engine's desk scale.
 */
typedef struct MsaGenConfig {
  uint64_t seed;
  uintptr_t max_sorts;
  uintptr_t max_carrier;
  uintptr_t max_ops;
  uintptr_t max_index;
  bool force_constant_support;
  bool force_surjective_transitions;
  bool inject_support_violation;
} MsaGenConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The report schema version this library emits.
 */
uint32_t msa_schema_version(void);

/**
 * The message of the most recent failure on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *msa_last_error(void);

/**
 * Parses and validates instance text into a handle. On failure the
 * located diagnostics are joined into the error message.
 *
 * # Safety
 * `text` must point to a NUL-terminated string and `out` must be a
 * valid location to write the handle to.
 */
enum MsaStatus msa_instance_parse(const char *text, struct MsaInstance **out);

/**
 * Releases an instance handle.
 *
 * # Safety
 * `inst` must be null or a handle previously returned by this library,
 * not yet freed.
 */
void msa_instance_free(struct MsaInstance *inst);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string previously returned by this library,
 * not yet freed.
 */
void msa_string_free(char *s);

/**
 * Runs the structural validators over raw text and returns the JSON
 * report. A failing report is still returned, with `CheckFailed`.
 *
 * # Safety
 * `text` must point to a NUL-terminated string and `report_json` must
 * be a valid location to write to.
 */
enum MsaStatus msa_validate(const char *text, char **report_json);

/**
 * Runs the named check family (`all`, `prop25`, `prop28`, `prop29`,
 * `retraction`, `naturality`, `cylinder`, `composition`) over every
 * applicable declared instance and returns the JSON report.
 *
 * # Safety
 * `inst` must be a live handle from this library, `which` a
 * NUL-terminated string, and `report_json` a valid write location.
 */
enum MsaStatus msa_instance_check(const struct MsaInstance *inst,
                                  const char *which,
                                  uintptr_t max_iso_search,
                                  char **report_json);

/**
 * Computes a construction (`projlim`, `indlim`, `ultraproduct`,
 * `reducedproduct`) for the named declaration and returns the emitted
 * instance text.
 *
 * # Safety
 * `inst` must be a live handle from this library, `what` and `name`
 * NUL-terminated strings, and `out_text` a valid write location.
 */
enum MsaStatus msa_instance_construct(const struct MsaInstance *inst,
                                      const char *what,
                                      const char *name,
                                      char **out_text);

/**
 * Generates a seeded instance file; the same configuration always
 * yields the same bytes.
 *
 * # Safety
 * `config` must point to a valid configuration and `out_text` must be
 * a valid write location.
 */
enum MsaStatus msa_generate(const struct MsaGenConfig *config, char **out_text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSA_H */
