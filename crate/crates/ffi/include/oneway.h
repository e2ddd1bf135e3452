#ifndef ONEWAY_H
#define ONEWAY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Construction variant accepted by [`oneway_compile`].
 */
#define ONEWAY_MODE_DKP 0

/**
 * Construction variant accepted by [`oneway_compile`].
 */
#define ONEWAY_MODE_RBB 1

/**
 * Result of every fallible call.
 */
typedef enum {
  ONEWAY_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  ONEWAY_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  ONEWAY_STATUS_INVALID_UTF8 = 2,
  /**
   * Text did not parse; the message carries `line:col`.
   */
  ONEWAY_STATUS_PARSE = 3,
  /**
   * The input was well typed but not acceptable (bad mode, ill-formed
   * pattern, unsupported gate).
   */
  ONEWAY_STATUS_INVALID = 4,
  /**
   * The pattern has no certified circuit; the message gives the reason.
   */
  ONEWAY_STATUS_REJECTED = 5,
  /**
   * An internal error was caught at the boundary.
   */
  ONEWAY_STATUS_PANIC = 6,
} OnewayStatus;

/**
 * Opaque quantum circuit.
 */
typedef struct OnewayCircuit OnewayCircuit;

/**
 * Opaque measurement pattern.
 */
typedef struct OnewayPattern OnewayPattern;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message describing the last failure on this thread, or null. The
 * string is owned by the library and valid until the next call.
 */
const char *oneway_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void oneway_string_free(char *s);

/**
 * Parses a pattern from its text format.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
OnewayStatus oneway_pattern_parse(const char *text, OnewayPattern **out);

/**
 * Releases a pattern. Null is ignored.
 *
 * # Safety
 * `p` must be null or a handle from this library, not yet freed.
 */
void oneway_pattern_free(OnewayPattern *p);

/**
 * Prints a pattern in its text format; free the result with
 * [`oneway_string_free`].
 *
 * # Safety
 * `p` must be a live handle; `out` must be valid for writes.
 */
OnewayStatus oneway_pattern_to_text(const OnewayPattern *p, char **out);

/**
 * Number of qubits a pattern touches, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t oneway_pattern_qubit_count(const OnewayPattern *p);

/**
 * Brings a pattern into normal form.
 *
 * # Safety
 * `p` must be a live handle; `out` must be valid for writes.
 */
OnewayStatus oneway_pattern_normalize(const OnewayPattern *p, OnewayPattern **out);

/**
 * Parses a circuit from its text format.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
OnewayStatus oneway_circuit_parse(const char *text, OnewayCircuit **out);

/**
 * Releases a circuit. Null is ignored.
 *
 * # Safety
 * `c` must be null or a handle from this library, not yet freed.
 */
void oneway_circuit_free(OnewayCircuit *c);

/**
 * Prints a circuit in its text format; free the result with
 * [`oneway_string_free`].
 *
 * # Safety
 * `c` must be a live handle; `out` must be valid for writes.
 */
OnewayStatus oneway_circuit_to_text(const OnewayCircuit *c, char **out);

/**
 * Translates a circuit into a pattern with the given construction
 * (`ONEWAY_MODE_DKP` or `ONEWAY_MODE_RBB`), normalized unless `normalize`
 * is false.
 *
 * # Safety
 * `c` must be a live handle; `out` must be valid for writes.
 */
OnewayStatus oneway_compile(const OnewayCircuit *c,
                            uint32_t mode,
                            bool normalize,
                            OnewayPattern **out);

/**
 * Extracts the circuit a pattern implements. Returns
 * [`OnewayStatus::Rejected`] with the reason in [`oneway_last_error`]
 * when the pattern is not certified.
 *
 * # Safety
 * `p` must be a live handle; `out` must be valid for writes.
 */
OnewayStatus oneway_semantic(const OnewayPattern *p, OnewayCircuit **out);

/**
 * The library version as a static NUL-terminated string.
 */
const char *oneway_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONEWAY_H */
