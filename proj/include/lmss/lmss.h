#ifndef LMSS_H
#define LMSS_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(LMSS_BUILDING)
#define LMSS_API __attribute__((visibility("default")))
#else
#define LMSS_API
#endif

typedef enum lmss_status {
    LMSS_OK = 0,
    LMSS_ERR_INTERNAL = 1,
    LMSS_ERR_SCHEMA = 2,   /* malformed config or invalid argument */
    LMSS_ERR_NUMERIC = 3,  /* non-convergence or a domain violation */
    LMSS_ERR_BUDGET = 4,   /* a size limit was exceeded */
    LMSS_ERR_IO = 5
} lmss_status;

typedef struct lmss_runner lmss_runner;

LMSS_API const char* lmss_version(void);

LMSS_API lmss_status lmss_runner_create(lmss_runner** out);
LMSS_API void lmss_runner_destroy(lmss_runner* runner);

/* Overrides applied on top of every config passed to lmss_runner_run. */
LMSS_API lmss_status lmss_runner_set_seed(lmss_runner* runner, uint64_t seed);
LMSS_API lmss_status lmss_runner_set_threads(lmss_runner* runner, int threads);
LMSS_API lmss_status lmss_runner_set_max_cells(lmss_runner* runner, uint64_t max_cells);
LMSS_API lmss_status lmss_runner_set_output_dir(lmss_runner* runner, const char* path);
LMSS_API lmss_status lmss_runner_set_cache_dir(lmss_runner* runner, const char* path);
/* NULL clears; otherwise the config command must match. */
LMSS_API lmss_status lmss_runner_set_command(lmss_runner* runner, const char* command);

/* Runs one JSON config. On success *summary_json (if non-NULL) receives a string to release with
   lmss_string_free. On failure the message is available from lmss_runner_last_error. */
LMSS_API lmss_status lmss_runner_run(lmss_runner* runner, const char* config_json, char** summary_json);
LMSS_API const char* lmss_runner_last_error(const lmss_runner* runner);

LMSS_API void lmss_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
