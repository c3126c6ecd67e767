#ifndef KRF_H
#define KRF_H

/* Generated by cbindgen from the krf-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of any fallible call.
 */
typedef enum KrfStatus {
  KRF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  KRF_STATUS_NULL_ARGUMENT = 1,
  /**
   * A text argument was not valid UTF-8.
   */
  KRF_STATUS_INVALID_UTF8 = 2,
  /**
   * The input did not parse; see `krf_last_error`.
   */
  KRF_STATUS_PARSE_ERROR = 3,
  /**
   * The byte string is not a theory of the canonical formalism.
   */
  KRF_STATUS_INVALID_THEORY = 4,
  /**
   * An internal invariant failed; see `krf_last_error`.
   */
  KRF_STATUS_INTERNAL_ERROR = 5,
} KrfStatus;

/**
 * Outcome of a query-answering run.
 */
typedef enum KrfVerdict {
  /**
   * The query was answered within the fuel budget.
   */
  KRF_VERDICT_ACCEPTED = 0,
  /**
   * The budget ran out with no answer; never a definitive no.
   */
  KRF_VERDICT_EXHAUSTED = 1,
} KrfVerdict;

typedef struct KrfDatabase KrfDatabase;

typedef struct KrfQuery KrfQuery;

typedef struct KrfTheory KrfTheory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Valid until
 * the next failing call; never null.
 */
const char *krf_last_error(void);

/**
 * Library version as a static string.
 */
const char *krf_version(void);

/**
 * Parse a self-describing database text (signature header, one signed fact
 * per line). On success stores a handle in `out`; free with
 * `krf_database_free`.
 *
 * # Safety
 * `text` must be a valid nul-terminated string and `out` a valid pointer.
 */
enum KrfStatus krf_database_parse(const char *text, struct KrfDatabase **out);

/**
 * # Safety
 * `db` must come from `krf_database_parse` and not already be freed.
 */
void krf_database_free(struct KrfDatabase *db);

/**
 * Parse a sentence over the database's signature. Free with
 * `krf_query_free`.
 *
 * # Safety
 * `text` must be nul-terminated, `db` a live database handle, `out` valid.
 */
enum KrfStatus krf_query_parse(const char *text,
                               const struct KrfDatabase *db,
                               struct KrfQuery **out);

/**
 * # Safety
 * `q` must come from `krf_query_parse` and not already be freed.
 */
void krf_query_free(struct KrfQuery *q);

/**
 * Wrap raw theory bytes. Rejects byte strings that are not theories of the
 * canonical formalism. Free with `krf_theory_free`.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be valid.
 */
enum KrfStatus krf_theory_from_bytes(const uint8_t *data, uintptr_t len, struct KrfTheory **out);

/**
 * # Safety
 * `t` must come from `krf_theory_from_bytes` and not already be freed.
 */
void krf_theory_free(struct KrfTheory *t);

/**
 * Answer `query` over `db` under the canonical-formalism theory, running
 * the closure engine for at most `fuel` iterations. `steps`, if non-null,
 * receives the iteration count.
 *
 * # Safety
 * All handles must be live; `verdict` must be a valid pointer.
 */
enum KrfStatus krf_qa(const struct KrfTheory *theory,
                      const struct KrfDatabase *db,
                      const struct KrfQuery *query,
                      uint64_t fuel,
                      enum KrfVerdict *verdict,
                      uint64_t *steps);

/**
 * Decide a Datalog consequence directly: does the rule text, applied to
 * `db`, entail `query`? Writes 1 or 0 to `holds`.
 *
 * # Safety
 * `rules` must be nul-terminated; handles live; `holds` valid.
 */
enum KrfStatus krf_datalog_qa(const char *rules,
                              const struct KrfDatabase *db,
                              const struct KrfQuery *query,
                              int32_t *holds);

/**
 * Observationally equal variants of a theory: writes up to `count` handles
 * into `out`, all pairwise distinct from each other and the original.
 * Each must be freed with `krf_theory_free`.
 *
 * # Safety
 * `theory` must be live; `out` must have room for `count` pointers.
 */
enum KrfStatus krf_theory_padding(const struct KrfTheory *theory,
                                  uintptr_t count,
                                  struct KrfTheory **out);

/**
 * Length in bytes of the theory's bit string rounded up to whole bytes.
 *
 * # Safety
 * `t` must be a live theory handle.
 */
uintptr_t krf_theory_byte_len(const struct KrfTheory *t);

/**
 * Copy the theory bytes into `buf`, which must hold at least
 * `krf_theory_byte_len` bytes. Returns the number written.
 *
 * # Safety
 * `t` must be live and `buf` must have the stated capacity.
 */
uintptr_t krf_theory_copy_bytes(const struct KrfTheory *t, uint8_t *buf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KRF_H */
