#ifndef HRM_H
#define HRM_H

#include <stdbool.h>
#include <stddef.h>

/*
 Result code of every fallible call.
 */
typedef enum HrmStatus {
  HRM_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  HRM_STATUS_NULL_POINTER = 1,
  /*
   A string argument was not valid UTF-8.
   */
  HRM_STATUS_INVALID_UTF8 = 2,
  /*
   A document could not be parsed or did not match the schema.
   */
  HRM_STATUS_PARSE = 3,
  /*
   The hierarchy is malformed or the operation is undefined for it.
   */
  HRM_STATUS_INVALID = 4,
  /*
   A trace mentioned an unknown proposition.
   */
  HRM_STATUS_UNKNOWN_PROPOSITION = 5,
  /*
   The library panicked.
   */
  HRM_STATUS_PANIC = 6,
} HrmStatus;

/*
 Outcome of running a trace through a hierarchy.
 */
typedef enum HrmVerdict {
  HRM_VERDICT_ACCEPT = 0,
  HRM_VERDICT_REJECT = 1,
  HRM_VERDICT_NONE = 2,
} HrmVerdict;

/*
 Opaque hierarchy owned by the library.
 */
typedef struct HrmHandle HrmHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or an empty string.

 The pointer stays valid until the next call into the library on this thread.
 */
const char *hrm_last_error(void);

/*
 Library version as a static string.
 */
const char *hrm_version(void);

/*
 Parses a hierarchy from its JSON document.

 # Safety
 `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum HrmStatus hrm_load(const char *json, struct HrmHandle **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `h` must be null or a handle not yet freed.
 */
void hrm_free(struct HrmHandle *h);

/*
 Releases a string returned by the library. Null is ignored.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void hrm_string_free(char *s);

/*
 Serializes a hierarchy to JSON. Free the result with [`hrm_string_free`].

 # Safety
 `h` must be a live handle and `out` a writable pointer.
 */
enum HrmStatus hrm_to_json(const struct HrmHandle *h, char **out);

/*
 Writes whether the hierarchy passes every structural check. The
 violations of an invalid hierarchy are left in [`hrm_last_error`].

 # Safety
 `h` must be a live handle and `valid` a writable pointer.
 */
enum HrmStatus hrm_validate(const struct HrmHandle *h, bool *valid);

/*
 Writes the height of the hierarchy.

 # Safety
 `h` must be a live handle and `height` a writable pointer.
 */
enum HrmStatus hrm_height(const struct HrmHandle *h, size_t *height);

/*
 Writes the number of machines, and the total states and edges over them.

 # Safety
 `h` must be a live handle; each out-pointer must be writable or null.
 */
enum HrmStatus hrm_counts(const struct HrmHandle *h,
                          size_t *machines,
                          size_t *states,
                          size_t *edges);

/*
 Runs a JSON trace from the initial state and writes the verdict.

 # Safety
 `h` must be a live handle, `trace_json` a NUL-terminated string and
 `verdict` a writable pointer.
 */
enum HrmStatus hrm_classify(const struct HrmHandle *h,
                            const char *trace_json,
                            enum HrmVerdict *verdict);

/*
 Builds the equivalent flat hierarchy as a new handle.

 # Safety
 `h` must be a live handle and `out` a writable pointer.
 */
enum HrmStatus hrm_flatten(const struct HrmHandle *h, struct HrmHandle **out);

/*
 Compares two hierarchies on every trace up to `max_len` labels and writes
 whether all verdicts agree. The first mismatch, if any, is left in
 [`hrm_last_error`] as JSON.

 # Safety
 `a` and `b` must be live handles and `equivalent` a writable pointer.
 */
enum HrmStatus hrm_equivalent(const struct HrmHandle *a,
                              const struct HrmHandle *b,
                              size_t max_len,
                              bool *equivalent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HRM_H */
