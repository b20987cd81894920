#ifndef SPHERE_FV_H
#define SPHERE_FV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SfvStatus {
  SFV_STATUS_OK = 0,
  SFV_STATUS_NULL_POINTER = 1,
  SFV_STATUS_INVALID_ARGUMENT = 2,
  // Malformed scenario, unknown flux, or bad mesh parameters.
  SFV_STATUS_CONFIG = 3,
  // The scheme failed while stepping (non-finite state, degenerate CFL).
  SFV_STATUS_RUNTIME = 4,
  SFV_STATUS_IO = 5,
  // A run finished but an asserted invariant failed.
  SFV_STATUS_INVARIANT_FAILED = 6,
  SFV_STATUS_PANIC = 7,
} SfvStatus;

// A latitude-longitude mesh with two polar caps.
typedef struct SfvMesh SfvMesh;

// A scheme with its current state.
typedef struct SfvSolver SfvSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The string is
// owned by the caller and released with [`sfv_string_free`].
char *sfv_last_error_message(void);

// # Safety
// `s` must come from this library and not have been freed.
void sfv_string_free(char *s);

// # Safety
// `out` must be valid for writing a pointer.
enum SfvStatus sfv_mesh_new(size_t n_phi, size_t n_theta, double theta_min, struct SfvMesh **out);

// # Safety
// `mesh` must be null or a live handle from [`sfv_mesh_new`].
void sfv_mesh_free(struct SfvMesh *mesh);

// # Safety
// `mesh` must be a live handle and `out` valid for writing.
enum SfvStatus sfv_mesh_cell_count(const struct SfvMesh *mesh, size_t *out);

// Copy the cell areas into `buf`, which holds `len` doubles.
//
// # Safety
// `mesh` must be a live handle and `buf` valid for `len` writes.
enum SfvStatus sfv_mesh_cell_areas(const struct SfvMesh *mesh, double *buf, size_t len);

// Build a solver from a scenario in JSON, with the state set to the cell
// averages of its initial data.
//
// # Safety
// `config_json` must be a NUL-terminated string and `out` valid for writing.
enum SfvStatus sfv_solver_new(const char *config_json, struct SfvSolver **out);

// # Safety
// `solver` must be null or a live handle from [`sfv_solver_new`].
void sfv_solver_free(struct SfvSolver *solver);

// A new handle to the solver's mesh, released with [`sfv_mesh_free`].
//
// # Safety
// `solver` must be a live handle and `out` valid for writing.
enum SfvStatus sfv_solver_mesh(const struct SfvSolver *solver, struct SfvMesh **out);

// Take `steps` steps of the CFL timestep.
//
// # Safety
// `solver` must be a live handle.
enum SfvStatus sfv_solver_step(struct SfvSolver *solver, size_t steps);

// Advance to time `t`, shortening the last step to land on it.
//
// # Safety
// `solver` must be a live handle.
enum SfvStatus sfv_solver_advance_to(struct SfvSolver *solver, double t);

// # Safety
// `solver` must be a live handle and `t`, `tau`, `steps` null or writable.
enum SfvStatus sfv_solver_time(const struct SfvSolver *solver,
                               double *t,
                               double *tau,
                               size_t *steps);

// Copy the cell averages into `buf`, which holds `len` doubles.
//
// # Safety
// `solver` must be a live handle and `buf` valid for `len` writes.
enum SfvStatus sfv_solver_state(const struct SfvSolver *solver, double *buf, size_t len);

// Replace the cell averages; `len` must equal the cell count.
//
// # Safety
// `solver` must be a live handle and `buf` valid for `len` reads.
enum SfvStatus sfv_solver_set_state(struct SfvSolver *solver, const double *buf, size_t len);

// `Σ_K u_K |K|`.
//
// # Safety
// `solver` must be a live handle and `out` valid for writing.
enum SfvStatus sfv_solver_mass(const struct SfvSolver *solver, double *out);

// Run a scenario with all diagnostics, writing its files into `out_dir`.
// Returns [`SfvStatus::InvariantFailed`] when the run completed but a
// monitored invariant did not hold.
//
// # Safety
// Both arguments must be NUL-terminated strings.
enum SfvStatus sfv_run_scenario(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPHERE_FV_H */
