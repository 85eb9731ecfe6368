#ifndef BARIFLEX_BARIFLEX_H
#define BARIFLEX_BARIFLEX_H

#include <stddef.h>
#include <stdint.h>

#if defined(BARIFLEX_BUILDING)
#define BF_API __attribute__((visibility("default")))
#else
#define BF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bf_status {
  BF_OK = 0,
  BF_INVALID_ARGUMENT = 1,
  BF_CONFIG_ERROR = 2,
  BF_NO_CONVERGENCE = 3,
  BF_SINGULAR = 4,
  BF_LINKAGE_LOCKED = 5,
  BF_SYNTHESIS_FAILED = 6,
  BF_IO_ERROR = 7,
  BF_INTERNAL_ERROR = 8
} bf_status;

typedef enum bf_command_kind {
  BF_CMD_OPEN = 0,
  BF_CMD_CLOSE = 1,
  BF_CMD_HOLD = 2,     /* value: motor torque [N m] */
  BF_CMD_POSITION = 3  /* value: motor angle [rad] */
} bf_command_kind;

typedef struct bf_fixture bf_fixture;
typedef struct bf_objects bf_objects;
typedef struct bf_state bf_state;
typedef struct bf_report bf_report;

/* Message of the last failed call on this thread; empty after success. */
BF_API const char* bf_last_error(void);
BF_API const char* bf_status_name(bf_status status);
BF_API const char* bf_version(void);
BF_API const char* bf_default_fixture_dir(void);
BF_API const char* bf_default_data_dir(void);

/* Fixtures ---------------------------------------------------------------- */

BF_API size_t bf_builtin_fixture_count(void);
BF_API const char* bf_builtin_fixture_name(size_t index);

/* `spec` is a bundle path, a fixture name looked up in `fixture_dir` (may be
   NULL) and then among the built-ins, or "default". */
BF_API bf_status bf_fixture_open(const char* spec, const char* fixture_dir, bf_fixture** out);
BF_API bf_status bf_fixture_save(const bf_fixture* fixture, const char* dir);
BF_API const char* bf_fixture_name(const bf_fixture* fixture);
BF_API void bf_fixture_free(bf_fixture* fixture);

/* Object set; `path` NULL gives the built-in five objects. */
BF_API bf_status bf_objects_open(const char* path, bf_objects** out);
BF_API size_t bf_objects_count(const bf_objects* objects);
BF_API bf_status bf_objects_save(const bf_objects* objects, const char* path);
BF_API void bf_objects_free(bf_objects* objects);

/* Simulation -------------------------------------------------------------- */

BF_API bf_status bf_state_create(const bf_fixture* fixture, double motor_angle, bf_state** out);
BF_API bf_status bf_state_step(const bf_fixture* fixture, bf_state* state, bf_command_kind kind, double value,
                               double dt);
BF_API bf_status bf_state_motor_angle(const bf_state* state, double* out);
BF_API bf_status bf_state_aperture(const bf_fixture* fixture, const bf_state* state, double* out);
BF_API void bf_state_free(bf_state* state);

/* Experiments --------------------------------------------------------------
   Each run returns a report: output files (name and CSV text), named scalar
   metrics, and whether the acceptance bounds that apply held. */

BF_API bf_status bf_synthesize(uint64_t seed, bf_report** out);
BF_API bf_status bf_run_compliance(const bf_fixture* const* fixtures, size_t count, int trials, bf_report** out);
BF_API bf_status bf_run_durability(const bf_fixture* fixture, int cycles, bf_report** out);
BF_API bf_status bf_run_grasp_matrix(const bf_fixture* const* fixtures, size_t count, const bf_objects* objects,
                                     int jobs, bf_report** out);
BF_API bf_status bf_run_precision(const bf_fixture* fixture, uint64_t seed, bf_report** out);
BF_API bf_status bf_run_speed(const bf_fixture* const* fixtures, size_t count, bf_report** out);
/* `scenario_path` NULL gives the built-in cube scenario on `fixture`. */
BF_API bf_status bf_run_training(const bf_fixture* fixture, const char* scenario_path, const char* fixture_dir,
                                 uint64_t seed, bf_report** out);
/* Fits the fixtures in place to the reference curves at `reference_path`. */
BF_API bf_status bf_calibrate(bf_fixture* const* fixtures, size_t count, const char* reference_path, bf_report** out);
BF_API bf_status bf_verify(const bf_fixture* fixture, uint64_t seed, bf_report** out);

/* Reports ----------------------------------------------------------------- */

BF_API size_t bf_report_file_count(const bf_report* report);
BF_API const char* bf_report_file_name(const bf_report* report, size_t index);
BF_API const char* bf_report_file_text(const bf_report* report, size_t index);
BF_API size_t bf_report_metric_count(const bf_report* report);
BF_API const char* bf_report_metric_name(const bf_report* report, size_t index);
BF_API bf_status bf_report_metric(const bf_report* report, const char* name, double* out);
/* 1 when every acceptance bound checked by the run held. */
BF_API int bf_report_passed(const bf_report* report);
/* One line per bound checked, plus any notes. */
BF_API const char* bf_report_summary(const bf_report* report);
BF_API void bf_report_free(bf_report* report);

#ifdef __cplusplus
}
#endif

#endif
