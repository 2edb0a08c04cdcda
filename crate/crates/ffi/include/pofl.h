#ifndef POFL_H
#define POFL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PoflStatus {
  POFL_STATUS_OK = 0,
  POFL_STATUS_NULL_POINTER = 1,
  POFL_STATUS_INVALID_UTF8 = 2,
  POFL_STATUS_INVALID_ARGUMENT = 3,
  POFL_STATUS_CONFIG = 4,
  POFL_STATUS_PIPELINE = 5,
  POFL_STATUS_CHAIN_INVALID = 6,
  POFL_STATUS_PANIC = 7,
} PoflStatus;

/**
 * Opaque simulator handle.
 */
typedef struct PoflSimulator PoflSimulator;

/**
 * Market, provider and pool parameters of one trade.
 */
typedef struct PoflTradeParams {
  double eps1;
  double eps2;
  double m_bar;
  double ds_bar;
  double alpha;
  double beta;
  double eta;
  double q;
  double alpha_t;
  double beta_t;
  double reputation;
} PoflTradeParams;

typedef struct PoflEquilibrium {
  double m_star;
  double ds_star;
  double p;
  double pool_utility;
  double provider_utility;
} PoflEquilibrium;

/**
 * Library-owned bytes.
 */
typedef struct PoflBuffer {
  uint8_t *data;
  size_t len;
} PoflBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *pofl_last_error(void);

/**
 * Solves the trading equilibrium for `params`.
 *
 * # Safety
 * `params` and `out` must be valid pointers or null.
 */
enum PoflStatus pofl_equilibrium(const struct PoflTradeParams *params, struct PoflEquilibrium *out);

/**
 * Counts matching labels through the garbled comparison.
 *
 * # Safety
 * `predicted` and `actual` must point to `len` readable values; `out_n`
 * must be writable.
 */
enum PoflStatus pofl_gc_match_count(const uint32_t *predicted,
                                    const uint32_t *actual,
                                    size_t len,
                                    uint32_t label_bits,
                                    uint64_t seed,
                                    uint64_t *out_n);

/**
 * Creates a simulator from a TOML scenario.
 *
 * # Safety
 * `config_toml` must be a nul-terminated string; `out` must be writable.
 */
enum PoflStatus pofl_simulator_new(const char *config_toml, struct PoflSimulator **out);

/**
 * Runs one round and returns its JSON report.
 *
 * # Safety
 * `sim` must come from [`pofl_simulator_new`]; `out_json` must be writable.
 */
enum PoflStatus pofl_simulator_run_round(struct PoflSimulator *sim, struct PoflBuffer *out_json);

/**
 * Canonical dump of the simulator's chain.
 *
 * # Safety
 * `sim` must come from [`pofl_simulator_new`]; `out` must be writable.
 */
enum PoflStatus pofl_simulator_chain_dump(const struct PoflSimulator *sim, struct PoflBuffer *out);

/**
 * # Safety
 * `sim` must come from [`pofl_simulator_new`] and not be used afterwards.
 */
void pofl_simulator_free(struct PoflSimulator *sim);

/**
 * Checks a chain dump; writes the block count on success.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out_blocks` may be null.
 */
enum PoflStatus pofl_chain_validate(const uint8_t *data, size_t len, uint64_t *out_blocks);

/**
 * # Safety
 * `buf` must have been produced by this library and not freed before.
 */
void pofl_buffer_free(struct PoflBuffer buf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POFL_H */
