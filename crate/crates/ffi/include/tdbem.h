#ifndef TDBEM_H
#define TDBEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Boundary integral formulation.
 */
typedef enum TdbemOperator {
  TDBEM_OPERATOR_SINGLE_LAYER = 0,
  TDBEM_OPERATOR_HYPERSINGULAR = 1,
  TDBEM_OPERATOR_DTN = 2,
} TdbemOperator;

/*
 Result of a call.
 */
typedef enum TdbemStatus {
  TDBEM_STATUS_OK = 0,
  TDBEM_STATUS_NULL_POINTER = 1,
  TDBEM_STATUS_INVALID_ARGUMENT = 2,
  TDBEM_STATUS_NUMERICAL_FAILURE = 3,
  TDBEM_STATUS_BUFFER_TOO_SMALL = 4,
  TDBEM_STATUS_IO = 5,
  TDBEM_STATUS_PANIC = 6,
} TdbemStatus;

/*
 Triangulated screen.
 */
typedef struct TdbemMesh TdbemMesh;

/*
 Marched density together with its system.
 */
typedef struct TdbemSolution TdbemSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Version string, static storage.
 */
const char *tdbem_version(void);

/*
 Message of the last failure on this thread, or null. Valid until the next
 failing call on the same thread.
 */
const char *tdbem_last_error(void);

/*
 Graded mesh of the square `[-1, 1]^2` with `8 levels^2` triangles.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum TdbemStatus tdbem_mesh_square(uintptr_t levels, double beta, struct TdbemMesh **out);

/*
 Graded mesh of the unit disc.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum TdbemStatus tdbem_mesh_disc(uintptr_t levels,
                                 double beta,
                                 uintptr_t sectors,
                                 struct TdbemMesh **out);

/*
 Mesh from its JSON file format.

 # Safety
 `json` must be a NUL-terminated string; `out` as for [`tdbem_mesh_square`].
 */
enum TdbemStatus tdbem_mesh_from_json(const char *json, struct TdbemMesh **out);

/*
 Number of triangles, 0 for a null handle.

 # Safety
 `mesh` must be null or a live handle.
 */
uintptr_t tdbem_mesh_num_triangles(const struct TdbemMesh *mesh);

/*
 Number of nodes, 0 for a null handle.

 # Safety
 `mesh` must be null or a live handle.
 */
uintptr_t tdbem_mesh_num_nodes(const struct TdbemMesh *mesh);

/*
 # Safety
 `mesh` must be null or a handle not freed before.
 */
void tdbem_mesh_free(struct TdbemMesh *mesh);

/*
 Assemble and march on a copy of `mesh`.

 `rhs_json` names the load, e.g. `{"kind":"PlaneWavePacket","k":[0.2,0.2,0.2]}`,
 `{"kind":"RingdownG"}`, `{"kind":"RingdownH"}` or `{"kind":"Zero"}`.

 # Safety
 `mesh` must be a live handle, `rhs_json` a NUL-terminated string and
 `out` valid storage for one handle.
 */
enum TdbemStatus tdbem_solve(const struct TdbemMesh *mesh,
                             enum TdbemOperator operator_,
                             const char *rhs_json,
                             double dt,
                             uintptr_t n_steps,
                             struct TdbemSolution **out);

/*
 Number of steps and unknowns per step.

 # Safety
 `sol` must be a live handle; the output pointers may be null.
 */
enum TdbemStatus tdbem_solution_shape(const struct TdbemSolution *sol,
                                      uintptr_t *n_steps,
                                      uintptr_t *size);

/*
 Copy the coefficients, step-major (`buf[(n - 1) * size + i]`).

 # Safety
 `sol` must be a live handle and `buf` must hold `len` doubles.
 */
enum TdbemStatus tdbem_solution_coefficients(const struct TdbemSolution *sol,
                                             double *buf,
                                             uintptr_t len);

/*
 Single layer potential at `n_points` points (`xyz` triples) and
 `n_times` times; `out[p * n_times + t]`.

 # Safety
 `sol` must be a live handle, `points` must hold `3 n_points` doubles,
 `times` `n_times` doubles and `out` `n_points n_times` doubles.
 */
enum TdbemStatus tdbem_evaluate_single_layer(const struct TdbemSolution *sol,
                                             const double *points,
                                             uintptr_t n_points,
                                             const double *times,
                                             uintptr_t n_times,
                                             double *out);

/*
 # Safety
 `sol` must be null or a handle not freed before.
 */
void tdbem_solution_free(struct TdbemSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDBEM_H */
