#ifndef SPATEXT_H
#define SPATEXT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SpxStatus {
  SPX_STATUS_OK = 0,
  SPX_STATUS_NULL_POINTER = 1,
  SPX_STATUS_INVALID_ARGUMENT = 2,
  SPX_STATUS_UNKNOWN_QUERY = 3,
  SPX_STATUS_DUPLICATE_QUERY = 4,
  SPX_STATUS_FINISHED = 5,
  SPX_STATUS_NOT_FINISHED = 6,
  SPX_STATUS_BUFFER_TOO_SMALL = 7,
  SPX_STATUS_INTERNAL = 8,
  SPX_STATUS_PANIC = 9,
} SpxStatus;

typedef enum SpxStrategy {
  SPX_STRATEGY_HYBRID = 0,
  SPX_STRATEGY_SPACE_GRID = 1,
  SPX_STRATEGY_SPACE_KDTREE = 2,
  SPX_STRATEGY_TEXT_FREQUENCY = 3,
} SpxStrategy;

typedef enum SpxMigration {
  SPX_MIGRATION_OFF = 0,
  SPX_MIGRATION_DP = 1,
  SPX_MIGRATION_GR = 2,
  SPX_MIGRATION_SI = 3,
  SPX_MIGRATION_RA = 4,
} SpxMigration;

/*
 Opaque engine handle.
 */
typedef struct SpxEngine SpxEngine;

/*
 Engine settings. Fill with [`spx_config_default`] and adjust.
 */
typedef struct SpxConfig {
  uint32_t workers;
  uint32_t dispatchers;
  enum SpxStrategy strategy;
  enum SpxMigration migration;
  /*
   Balance threshold, above 1.
   */
  double sigma;
  /*
   Elements held back to build the initial partitioning.
   */
  uint64_t warmup;
  /*
   Elements per accounting window.
   */
  uint64_t window;
  uint64_t seed;
} SpxConfig;

/*
 One (query, object) match.
 */
typedef struct SpxMatch {
  uint64_t query_id;
  uint64_t object_id;
} SpxMatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. Valid until the next failing call.
 */
const char *spx_last_error(void);

/*
 Library version as a static string.
 */
const char *spx_version(void);

/*
 # Safety
 `out` must point to writable memory for one `SpxConfig`.
 */
enum SpxStatus spx_config_default(struct SpxConfig *out);

/*
 Creates an engine. On success `*out` owns a new handle.

 # Safety
 `config` must be NULL or point to a valid `SpxConfig`; `out` must be writable.
 */
enum SpxStatus spx_engine_new(const struct SpxConfig *config, struct SpxEngine **out);

/*
 Releases an engine. NULL is ignored.

 # Safety
 `engine` must be NULL or a handle from `spx_engine_new` not yet freed.
 */
void spx_engine_free(struct SpxEngine *engine);

/*
 Feeds one object with `n_terms` term ids.

 # Safety
 `engine` must be a live handle; `terms` must hold `n_terms` values.
 */
enum SpxStatus spx_engine_push_object(struct SpxEngine *engine,
                                      uint64_t id,
                                      double x,
                                      double y,
                                      const uint32_t *terms,
                                      size_t n_terms);

/*
 Subscribes a query. The expression is a conjunction of `n_clauses`
 disjunctions; clause `i` holds `clause_lens[i]` consecutive ids of `terms`.

 # Safety
 `engine` must be a live handle; `clause_lens` must hold `n_clauses` values
 and `terms` their sum.
 */
enum SpxStatus spx_engine_insert_query(struct SpxEngine *engine,
                                       uint64_t id,
                                       double x0,
                                       double y0,
                                       double x1,
                                       double y1,
                                       const uint32_t *clause_lens,
                                       size_t n_clauses,
                                       const uint32_t *terms);

/*
 Unsubscribes a live query.

 # Safety
 `engine` must be a live handle.
 */
enum SpxStatus spx_engine_delete_query(struct SpxEngine *engine, uint64_t id);

/*
 Drains the engine and collects the deduplicated matches. Later pushes fail.

 # Safety
 `engine` must be a live handle.
 */
enum SpxStatus spx_engine_finish(struct SpxEngine *engine);

/*
 Number of matches of a finished engine.

 # Safety
 `engine` must be a live handle; `out` must be writable.
 */
enum SpxStatus spx_engine_match_count(const struct SpxEngine *engine, size_t *out);

/*
 Copies the matches, sorted by query then object id, into `buf`.
 `*written` receives the number copied; if `cap` is too small nothing is copied.

 # Safety
 `engine` must be a live handle; `buf` must hold `cap` entries; `written` must be writable.
 */
enum SpxStatus spx_engine_matches(const struct SpxEngine *engine,
                                  struct SpxMatch *buf,
                                  size_t cap,
                                  size_t *written);

/*
 Whether `id` is currently subscribed.

 # Safety
 `engine` must be a live handle; `out` must be writable.
 */
enum SpxStatus spx_engine_is_live(const struct SpxEngine *engine, uint64_t id, bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPATEXT_H */
