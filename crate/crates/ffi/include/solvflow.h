#ifndef SOLVFLOW_H
#define SOLVFLOW_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum SolvStatus {
  SOLV_OK = 0,
  SOLV_ERR_NULL_ARGUMENT = 1,
  SOLV_ERR_UTF8 = 2,
  SOLV_ERR_PARSE = 3,
  SOLV_ERR_CONFIG = 4,
  SOLV_ERR_CONSTRAINT = 5,
  SOLV_ERR_SOLVER = 6,
  SOLV_ERR_NON_CONVERGENCE = 7,
  SOLV_ERR_IO = 8,
  SOLV_ERR_OTHER = 9,
} SolvStatus;

/**
 * Opaque parsed molecule.
 */
typedef struct solv_molecule_t solv_molecule_t;

/**
 * Opaque parameter set.
 */
typedef struct solv_params_t solv_params_t;

/**
 * Opaque result of one full-system run.
 */
typedef struct solv_result_t solv_result_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread, or null if none. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *solv_last_error(void);

/**
 * Parses a structure text ("name x y z charge radius type_label" lines) and
 * assigns type indices against a type table ("label radius" lines, or null
 * for the built-in H/C/O table). On success stores a new handle in `out`.
 */
enum SolvStatus solv_molecule_parse(const char *name,
                                    const char *structure_text,
                                    const char *type_table_text,
                                    struct solv_molecule_t **out);

void solv_molecule_free(struct solv_molecule_t *m);

/**
 * Number of atoms in a parsed molecule; 0 for a null handle.
 */
uintptr_t solv_molecule_num_atoms(const struct solv_molecule_t *m);

/**
 * Loads a parameter set from its JSON document and checks the stability
 * constraints.
 */
enum SolvStatus solv_params_from_json(const char *json, struct solv_params_t **out);

void solv_params_free(struct solv_params_t *p);

/**
 * Runs the full coupled solve. `config_json` overrides solver settings
 * (same schema as the library's ScfConfig); pass null for defaults.
 */
enum SolvStatus solv_run_energy(const struct solv_molecule_t *m,
                                const struct solv_params_t *p,
                                const char *config_json,
                                struct solv_result_t **out);

void solv_result_free(struct solv_result_t *r);

/**
 * Polar solvation energy, kcal/mol; NaN for a null handle.
 */
double solv_result_dg_polar(const struct solv_result_t *r);

/**
 * Nonpolar energy under the loaded parameters, kcal/mol.
 */
double solv_result_g_nonpolar(const struct solv_result_t *r);

/**
 * Total solvation free energy, kcal/mol.
 */
double solv_result_dg_total(const struct solv_result_t *r);

/**
 * Surface area of the converged interface, A^2.
 */
double solv_result_area(const struct solv_result_t *r);

/**
 * Enclosed solute volume, A^3.
 */
double solv_result_volume(const struct solv_result_t *r);

/**
 * Number of per-type interaction features.
 */
uintptr_t solv_result_num_lj(const struct solv_result_t *r);

/**
 * Interaction feature `i`, A^3; NaN when out of range.
 */
double solv_result_lj(const struct solv_result_t *r, uintptr_t i);

/**
 * Outer iterations the coupled loop took.
 */
uintptr_t solv_result_outer_iterations(const struct solv_result_t *r);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SOLVFLOW_H */
