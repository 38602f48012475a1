#ifndef KGM_KGM_H
#define KGM_KGM_H

/* C interface to the kgm solver library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions return a kgm_status; on failure kgm_last_error() describes the
 * problem (the message is thread-local and valid until the next call on the
 * same thread). Nodal arrays use the lexicographic node order
 * i0 + n0 * (i1 + n1 * i2); boundary arrays have one value per boundary slot
 * (see kgm_grid_slot_count). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define KGM_API __declspec(dllexport)
#elif defined(__GNUC__)
#define KGM_API __attribute__((visibility("default")))
#else
#define KGM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kgm_status {
  KGM_OK = 0,
  KGM_ERR_INVALID_ARGUMENT = 1,
  KGM_ERR_SPACE_MISMATCH = 2,
  KGM_ERR_LAMBDA_VIOLATION = 3,
  KGM_ERR_NOT_CONVERGED = 4,
  KGM_ERR_IO = 5,
  KGM_ERR_CONFIG = 6,
  KGM_ERR_INTERNAL = 7
} kgm_status;

typedef struct kgm_grid kgm_grid;
typedef struct kgm_problem kgm_problem;
typedef struct kgm_config kgm_config;
typedef struct kgm_report kgm_report;

KGM_API const char* kgm_api_version(void);
KGM_API const char* kgm_status_string(kgm_status status);
KGM_API const char* kgm_last_error(void);

/* Grid */
KGM_API kgm_status kgm_grid_create(int dim, const double* extent, const int* n, kgm_grid** out);
KGM_API void kgm_grid_destroy(kgm_grid* grid);
KGM_API kgm_status kgm_grid_node_count(const kgm_grid* grid, size_t* out);
KGM_API kgm_status kgm_grid_slot_count(const kgm_grid* grid, size_t* out);
/* Writes 3 coordinates per node (unused axes are 0). */
KGM_API kgm_status kgm_grid_positions(const kgm_grid* grid, double* xyz);
KGM_API kgm_status kgm_grid_integrate(const kgm_grid* grid, const double* values, double* out);

/* Reduced problem */
KGM_API kgm_status kgm_problem_create(const kgm_grid* grid, double m, const double* q, const double* alpha,
                                      kgm_problem** out);
KGM_API void kgm_problem_destroy(kgm_problem* problem);
KGM_API kgm_status kgm_problem_flux(const kgm_problem* problem, double* out);
KGM_API kgm_status kgm_problem_chi(const kgm_problem* problem, double* chi);

typedef struct kgm_j_report {
  double value;
  double value_direct;
  double value_decomposed;
  double qu_l3;
  double eta_mean;
  double xi_mean;
} kgm_j_report;

KGM_API kgm_status kgm_evaluate_J(const kgm_problem* problem, const double* u, kgm_j_report* out);
/* Riesz (H^1_0) gradient of J at u; `norm` may be NULL. */
KGM_API kgm_status kgm_gradient(const kgm_problem* problem, const double* u, double* gradient, double* norm);
KGM_API kgm_status kgm_phi(const kgm_problem* problem, const double* u, double* phi);

typedef struct kgm_minimize_options {
  double tol_grad;
  int max_iter;
  int nonnegative;
} kgm_minimize_options;

typedef struct kgm_solve_summary {
  double J;
  double grad_norm;
  int iterations;
  int converged;
} kgm_solve_summary;

KGM_API void kgm_minimize_options_default(kgm_minimize_options* opts);
/* `options` may be NULL for defaults; `u_out` receives the final iterate. */
KGM_API kgm_status kgm_minimize(const kgm_problem* problem, const double* u_init,
                                const kgm_minimize_options* options, double* u_out, kgm_solve_summary* out);

/* Configuration and experiments */
KGM_API kgm_status kgm_config_create(kgm_config** out);
KGM_API kgm_status kgm_config_load(const char* path, kgm_config** out);
KGM_API kgm_status kgm_config_parse(const char* text, kgm_config** out);
KGM_API kgm_status kgm_config_set(kgm_config* config, const char* key, const char* value);
KGM_API void kgm_config_destroy(kgm_config* config);

/* command: solve | invariants | sweep-delta | nonexistence | constants | residual.
 * out_dir may be NULL or empty to skip writing files. */
KGM_API kgm_status kgm_run(const kgm_config* config, const char* command, const char* out_dir, kgm_report** out);
KGM_API const char* kgm_report_text(const kgm_report* report);
KGM_API int kgm_report_passed(const kgm_report* report);
KGM_API size_t kgm_report_check_count(const kgm_report* report);

typedef struct kgm_check {
  const char* name;
  int passed;
  int asserted;
  double measured;
  double threshold;
} kgm_check;

KGM_API kgm_status kgm_report_check(const kgm_report* report, size_t index, kgm_check* out);
KGM_API void kgm_report_destroy(kgm_report* report);

#ifdef __cplusplus
}
#endif

#endif
