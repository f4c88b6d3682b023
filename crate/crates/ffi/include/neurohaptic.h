#ifndef NEUROHAPTIC_H
#define NEUROHAPTIC_H

#include <stdint.h>
#include <stddef.h>

typedef enum NhStatus {
  NhStatus_Ok = 0,
  NhStatus_NullPointer = 1,
  NhStatus_InvalidArgument = 2,
  NhStatus_InvalidAction = 3,
  NhStatus_NonFinite = 4,
  NhStatus_Config = 5,
  NhStatus_Shape = 6,
  NhStatus_Io = 7,
  NhStatus_Parse = 8,
  NhStatus_Internal = 9,
} NhStatus;

/*
 Opaque agent handle: configuration, state and its own seeded RNG.
 */
typedef struct NhAgent NhAgent;

/*
 Opaque handle to a fitted decoder bundle.
 */
typedef struct NhDecoder NhDecoder;

/*
 Agent parameters; see `nh_agent_config_default`.
 */
typedef struct NhAgentConfig {
  double c;
  double alpha0;
  double alpha_min;
  double epsilon0;
  double epsilon_min;
  double gamma;
  double q_init;
  uint32_t convergence_k;
  uint32_t max_trials;
} NhAgentConfig;

/*
 Agent state after the latest update.
 */
typedef struct NhAgentSnapshot {
  double q[4];
  uint64_t n[4];
  uint64_t t;
  double alpha;
  double epsilon;
  /*
   Converged action, or -1.
   */
  int32_t converged;
} NhAgentSnapshot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Static, NUL-terminated name of a status code.
 */
const char *nh_status_name(enum NhStatus status);

/*
 Copies the calling thread's last error message into `buf` (truncated,
 always NUL-terminated when `len > 0`). Returns the full message length.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t nh_last_error(char *buf, size_t len);

struct NhAgentConfig nh_agent_config_default(void);

/*
 Creates an agent. `config` may be null for the defaults.

 # Safety
 `config` must be null or valid; `out` must be valid for writes.
 */
enum NhStatus nh_agent_new(const struct NhAgentConfig *config, uint64_t seed, struct NhAgent **out);

/*
 # Safety
 `agent` must be null or a handle from `nh_agent_new` not yet freed.
 */
void nh_agent_free(struct NhAgent *agent);

/*
 Draws the next condition (0..4) from the agent's policy.

 # Safety
 `agent` must be a live handle; `out_action` valid for writes.
 */
enum NhStatus nh_agent_select_action(struct NhAgent *agent, uint8_t *out_action);

/*
 Applies one reward (clamped to [0, 1]) for `action`.

 # Safety
 `agent` must be a live handle.
 */
enum NhStatus nh_agent_update(struct NhAgent *agent, uint8_t action, double reward);

/*
 # Safety
 `agent` must be a live handle; `out` valid for writes.
 */
enum NhStatus nh_agent_snapshot(const struct NhAgent *agent, struct NhAgentSnapshot *out);

/*
 Loads a decoder bundle JSON file.

 # Safety
 `path` must be a NUL-terminated string; `out` valid for writes.
 */
enum NhStatus nh_decoder_load(const char *path, struct NhDecoder **out);

/*
 # Safety
 `decoder` must be null or a handle from `nh_decoder_load` not yet freed.
 */
void nh_decoder_free(struct NhDecoder *decoder);

/*
 Number of samples `nh_decoder_score_epoch` expects (channels x samples).
 */
size_t nh_epoch_len(void);

/*
 Scores one raw channel-major epoch and writes the normalized reward.

 # Safety
 `decoder` must be a live handle; `samples` must point to `len` doubles;
 `out_reward` valid for writes.
 */
enum NhStatus nh_decoder_score_epoch(const struct NhDecoder *decoder,
                                     const double *samples,
                                     size_t len,
                                     double *out_reward);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEUROHAPTIC_H */
