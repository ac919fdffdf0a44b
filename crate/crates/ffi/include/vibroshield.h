#ifndef VIBROSHIELD_H
#define VIBROSHIELD_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VsStatus {
  VS_STATUS_OK = 0,
  VS_STATUS_NULL_POINTER = 1,
  VS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A violated constraint has no usable gradient.
   */
  VS_STATUS_INFEASIBLE = 3,
  VS_STATUS_NOT_CONVERGED = 4,
  VS_STATUS_OUT_OF_RANGE = 5,
  VS_STATUS_FRAMING = 6,
  VS_STATUS_IO = 7,
  VS_STATUS_PANIC = 8,
} VsStatus;

/**
 * Opaque renderer: an actuator layout plus feedback gains.
 */
typedef struct VsEngine VsEngine;

/**
 * Opaque list of safety fields.
 */
typedef struct VsFieldSet VsFieldSet;

typedef struct VsVec3 {
  double x;
  double y;
  double z;
} VsVec3;

typedef struct VsEngineConfig {
  double k1;
  double k2;
  double k_v;
  double i_max;
  uint8_t frequency_index;
} VsEngineConfig;

typedef struct VsState {
  struct VsVec3 q;
  struct VsVec3 qdot;
} VsState;

/**
 * Output of one rendering pass.
 */
typedef struct VsFrame {
  uint8_t levels[32];
  double intensities[32];
  uint8_t frequency_index;
  /**
   * Obstacles whose constraint could not be evaluated.
   */
  size_t skipped;
} VsFrame;

typedef struct VsChainMessage {
  /**
   * Hops remaining, 0..=127.
   */
  uint8_t address;
  bool start;
  /**
   * 0..=15
   */
  uint8_t intensity_level;
  /**
   * 0..=7
   */
  uint8_t frequency_index;
} VsChainMessage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *vs_last_error(void);

struct VsFieldSet *vs_fields_new(void);

/**
 * # Safety
 * `set` must come from [`vs_fields_new`] and not be used afterwards.
 */
void vs_fields_free(struct VsFieldSet *set);

/**
 * Half-space `normal . (q - point) >= 0`.
 *
 * # Safety
 * `set` must be a live handle from [`vs_fields_new`].
 */
enum VsStatus vs_fields_add_plane(struct VsFieldSet *set,
                                  struct VsVec3 point,
                                  struct VsVec3 normal);

/**
 * Even `exponent` >= 2; outside the body `h > 0`.
 *
 * # Safety
 * `set` must be a live handle from [`vs_fields_new`].
 */
enum VsStatus vs_fields_add_superellipsoid(struct VsFieldSet *set,
                                           struct VsVec3 center,
                                           struct VsVec3 scale,
                                           uint32_t exponent);

/**
 * # Safety
 * `set` must be a live handle from [`vs_fields_new`].
 */
enum VsStatus vs_fields_add_sphere_margin(struct VsFieldSet *set,
                                          struct VsVec3 center,
                                          double d_min);

/**
 * # Safety
 * `set` must be a live handle; `out_len` must be writable.
 */
enum VsStatus vs_fields_len(const struct VsFieldSet *set, size_t *out_len);

/**
 * Barrier value, gradient and row-major Hessian of field `index` at `q`.
 * `out_hess` may be null.
 *
 * # Safety
 * `set` must be a live handle; `out_h` and `out_grad` must be writable;
 * a non-null `out_hess` must point to 9 writable doubles.
 */
enum VsStatus vs_field_eval(const struct VsFieldSet *set,
                            size_t index,
                            struct VsVec3 q,
                            double *out_h,
                            struct VsVec3 *out_grad,
                            double *out_hess);

struct VsEngineConfig vs_engine_config_default(void);

/**
 * Engine with the canonical 32-direction layout.
 *
 * # Safety
 * `out` must be writable.
 */
enum VsStatus vs_engine_new(struct VsEngineConfig cfg, struct VsEngine **out);

/**
 * Replaces the layout with one read from a layout CSV file.
 *
 * # Safety
 * `engine` must be a live handle; `path` a NUL-terminated string.
 */
enum VsStatus vs_engine_load_layout(struct VsEngine *engine, const char *path);

/**
 * # Safety
 * `engine` must come from [`vs_engine_new`] and not be used afterwards.
 */
void vs_engine_free(struct VsEngine *engine);

/**
 * Per-obstacle rendering of `u_ref` onto the actuators.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum VsStatus vs_engine_render(const struct VsEngine *engine,
                               const struct VsFieldSet *fields,
                               struct VsState state,
                               double yaw,
                               struct VsVec3 u_ref,
                               struct VsFrame *out);

/**
 * Minimum-norm input satisfying every barrier constraint at once.
 * Fields whose gradient is undefined at the current position are skipped.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum VsStatus vs_engine_safe_input(const struct VsEngine *engine,
                                   const struct VsFieldSet *fields,
                                   struct VsState state,
                                   struct VsVec3 u_ref,
                                   struct VsVec3 *out);

/**
 * Single force vector for a force-feedback device.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum VsStatus vs_engine_global_force(const struct VsEngine *engine,
                                     const struct VsFieldSet *fields,
                                     struct VsState state,
                                     struct VsVec3 u_ref,
                                     struct VsVec3 *out);

/**
 * # Safety
 * `out` must point to 2 writable bytes.
 */
enum VsStatus vs_protocol_encode(struct VsChainMessage msg, uint8_t *out);

/**
 * # Safety
 * `bytes` must point to 2 readable bytes; `out` must be writable.
 */
enum VsStatus vs_protocol_decode(const uint8_t *bytes, struct VsChainMessage *out);

/**
 * Microseconds for a message to reach unit `target` (1-based) of a chain
 * of `units` with the default hop latency.
 *
 * # Safety
 * `out_us` must be writable.
 */
enum VsStatus vs_chain_latency_us(size_t units, size_t target, uint64_t *out_us);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VIBROSHIELD_H */
