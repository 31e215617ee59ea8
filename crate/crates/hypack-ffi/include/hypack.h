#ifndef HYPACK_H
#define HYPACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HypackStatus {
  HYPACK_STATUS_OK = 0,
  HYPACK_STATUS_NULL_POINTER = 1,
  HYPACK_STATUS_INVALID_UTF8 = 2,
  HYPACK_STATUS_PARSE = 3,
  HYPACK_STATUS_PARAM = 4,
  HYPACK_STATUS_CAP_EXCEEDED = 5,
  HYPACK_STATUS_STAGE = 6,
  // The pipeline ran but produced fewer factors than requested.
  HYPACK_STATUS_PARTIAL = 7,
  // `hypack_verify` completed and the packing is invalid.
  HYPACK_STATUS_VERIFY_FAILED = 8,
  HYPACK_STATUS_PANIC = 9,
} HypackStatus;

// A parsed k-uniform hypergraph.
typedef struct HypackGraph HypackGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; valid until the next call.
const char *hypack_last_error(void);

// Parse the text format (`k n m` header, one edge per line).
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum HypackStatus hypack_graph_parse(const char *text, struct HypackGraph **out);

// The complete k-graph on `n` vertices, or null when `k < 2` or `k > n`.
struct HypackGraph *hypack_graph_complete(uintptr_t k, uintptr_t n);

// # Safety
// `g` must come from this library and not be freed twice; null is ignored.
void hypack_graph_free(struct HypackGraph *g);

// # Safety
// `g` must be a live handle or null (returns 0).
uintptr_t hypack_graph_k(const struct HypackGraph *g);

// # Safety
// `g` must be a live handle or null (returns 0).
uintptr_t hypack_graph_n(const struct HypackGraph *g);

// # Safety
// `g` must be a live handle or null (returns 0).
uintptr_t hypack_graph_m(const struct HypackGraph *g);

// Regularity statistics as JSON.
//
// # Safety
// `g` must be a live handle and `out_json` a valid pointer.
enum HypackStatus hypack_analyze(const struct HypackGraph *g, char **out_json);

// Run the packing pipeline. `targets` uses `;` between factors and `,` between cycle
// lengths; `profile` is profile-file text or null for defaults. Both out-pointers may
// be null. Returns `Partial` when fewer factors than requested were found; outputs are
// still written.
//
// # Safety
// Pointers must be valid or null as documented.
enum HypackStatus hypack_decompose(const struct HypackGraph *g,
                                   const char *targets,
                                   const char *profile,
                                   uint64_t seed,
                                   char **out_manifest,
                                   char **out_factors);

// Validate a factors document. Returns `Ok` iff the packing passes, `VerifyFailed`
// when it does not; the report JSON is written to `out_report` when non-null.
//
// # Safety
// Pointers must be valid or null as documented.
enum HypackStatus hypack_verify(const struct HypackGraph *g,
                                const char *factors_json,
                                char **out_report);

// # Safety
// `s` must come from this library and not be freed twice; null is ignored.
void hypack_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPACK_H */
