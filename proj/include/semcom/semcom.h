#ifndef SEMCOM_SEMCOM_H
#define SEMCOM_SEMCOM_H

#include <stdint.h>

#if defined(_WIN32)
#define SEMCOM_API __declspec(dllexport)
#else
#define SEMCOM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum semcom_status {
  SEMCOM_OK = 0,
  SEMCOM_ERR_INVALID_ARGUMENT = 1,
  SEMCOM_ERR_SHAPE_MISMATCH = 2,
  SEMCOM_ERR_MISSING_EXPERT = 3,
  SEMCOM_ERR_IO = 4,
  SEMCOM_ERR_CONFIG = 5,
  SEMCOM_ERR_BAD_MAGIC = 6,
  SEMCOM_ERR_BAD_VERSION = 7,
  SEMCOM_ERR_TRUNCATED = 8,
  SEMCOM_ERR_INTEGRITY = 9,
  SEMCOM_ERR_INVARIANT = 10,
  SEMCOM_ERR_INTERNAL = 99
} semcom_status;

typedef struct semcom_session semcom_session;

SEMCOM_API const char* semcom_version(void);
SEMCOM_API const char* semcom_status_name(semcom_status status);

/* Message of the last failed call on this thread; "" after success. */
SEMCOM_API const char* semcom_last_error(void);

/* Both paths may be NULL. A checkpoint path that does not exist yet starts an
   empty registry; it is the default target of semcom_session_save. When
   override_seed is nonzero, seed replaces the config's master seed. */
SEMCOM_API semcom_status semcom_session_open(const char* config_path, const char* checkpoint_path, uint64_t seed,
                                             int override_seed, semcom_session** out);
SEMCOM_API void semcom_session_close(semcom_session* session);

/* NULL path writes to the checkpoint path given at open. */
SEMCOM_API semcom_status semcom_session_save(semcom_session* session, const char* path);

/* Dataset summary as JSON. With out_path, also writes the images as CSV
   (split,label,p0..p255). */
SEMCOM_API semcom_status semcom_generate_data(semcom_session* session, const char* out_path, char** summary_json);

/* kind is "normal", "robust", "private" or "covert". rho is read only for
   covert, which requires has_rho. */
SEMCOM_API semcom_status semcom_train_expert(semcom_session* session, const char* kind, double rho, int has_rho);
SEMCOM_API semcom_status semcom_train_gate(semcom_session* session);

/* Results come back as CSV text (scenario,expert_set,snr_db,metric,value,seed). */
SEMCOM_API semcom_status semcom_run_scenario(semcom_session* session, char scenario_id, char** csv);
SEMCOM_API semcom_status semcom_report(semcom_session* session, char** csv);
SEMCOM_API semcom_status semcom_attack_eval(semcom_session* session, const char* spec_json, char** csv);

/* Registered experts and gate outputs as JSON. */
SEMCOM_API semcom_status semcom_describe(const semcom_session* session, char** json);

SEMCOM_API void semcom_free_string(char* s);

#ifdef __cplusplus
}
#endif

#endif
