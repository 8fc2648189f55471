#ifndef PHASESYNC_C_H
#define PHASESYNC_C_H

/* C interface to the phasesync library.
 *
 * All functions operate on an opaque session that owns the loaded network,
 * agent, and controller models plus numeric options. Inputs are JSON text;
 * results come back as heap-allocated JSON or CSV strings that the caller
 * releases with ps_free(). Every call returns a ps_status; on anything but
 * PS_OK the session error string describes the failure.
 */

#include <stddef.h>

#if defined(_WIN32)
#define PHASESYNC_API __declspec(dllexport)
#else
#define PHASESYNC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
  PS_OK = 0,
  PS_FAIL = 1,          /* negative verdict, infeasible design, failed search */
  PS_ERR_INPUT = 2,     /* malformed JSON or schema violation */
  PS_ERR_DOMAIN = 3,    /* domain error (e.g. not semi-sectorial) */
  PS_ERR_PRECONDITION = 4, /* classification or structure precondition */
  PS_ERR_INTERNAL = 5
} ps_status;

typedef struct ps_session ps_session;

PHASESYNC_API const char* ps_version(void);

PHASESYNC_API ps_session* ps_session_new(void);
PHASESYNC_API void ps_session_free(ps_session* s);

/* Last error message of the session; empty string when the last call
 * succeeded. The pointer stays valid until the next call on the session. */
PHASESYNC_API const char* ps_last_error(const ps_session* s);

/* Numeric options: "tol", "grid", "eps", "seed", "tfinal", "dt", "refine",
 * "margin_floor", "eps_min", "threads". Unknown keys are rejected. */
PHASESYNC_API ps_status ps_set_option(ps_session* s, const char* key,
                                      double value);

PHASESYNC_API ps_status ps_load_network(ps_session* s, const char* json_text);
PHASESYNC_API ps_status ps_load_agents(ps_session* s, const char* json_text);
PHASESYNC_API ps_status ps_load_controllers(ps_session* s,
                                            const char* json_text);

/* Phases of one complex matrix given as JSON ([[...]] or {"matrix": ...});
 * returns a JSON report. PS_ERR_DOMAIN when not semi-sectorial. */
PHASESYNC_API ps_status ps_matrix_phases(ps_session* s,
                                         const char* matrix_json,
                                         char** report_json);

/* Essential phases of the loaded network per strongly connected component. */
PHASESYNC_API ps_status ps_laplacian_phases(ps_session* s,
                                            char** report_json);

/* mode: "edges" (undirected per-edge dynamics from the loaded controllers),
 * "controllers"/"per-agent" (per-agent controllers), or "uniform".
 * Returns PS_FAIL when the condition does not hold. */
PHASESYNC_API ps_status ps_analyze(ps_session* s, const char* mode,
                                   char** verdict_json, char** margins_csv);

/* mode: "uniform" or "per-agent". PS_FAIL when infeasible; the design JSON
 * is produced either way. On success controllers_json (optional) receives
 * the controllers in the loadable file schema, and the design stays in the
 * session for a subsequent ps_simulate. */
PHASESYNC_API ps_status ps_design(ps_session* s, const char* mode,
                                  char** design_json,
                                  char** controllers_json);

/* mode: as in ps_analyze; controllers come from the last ps_design when no
 * controller file is loaded. x0_json: JSON array of the closed-loop initial
 * state, "random" for a seeded draw, or "" / null for zero. The horizon
 * defaults to a multiple of the slowest stable time constant; override with
 * the "tfinal" option. */
PHASESYNC_API ps_status ps_simulate(ps_session* s, const char* mode,
                                    const char* x0_json,
                                    char** trajectory_csv,
                                    char** disagreement_csv,
                                    char** report_json);

/* Phase responses of the loaded agents over frequency, as CSV. */
PHASESYNC_API ps_status ps_sweep(ps_session* s, char** csv);

PHASESYNC_API void ps_free(char* buf);

#ifdef __cplusplus
}
#endif

#endif /* PHASESYNC_C_H */
