#ifndef KMW_H
#define KMW_H

/* C surface of the wave-chart simulator. All entry points return a status;
 * on anything but KMW_OK the per-thread message from kmw_last_error()
 * describes what went wrong. Strings handed out by this library are owned by
 * the caller and released with kmw_string_free. */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kmw_status {
    KMW_OK = 0,
    KMW_ERR_INVALID_ARGUMENT = 1,
    KMW_ERR_PARSE = 2,      /* malformed document or unknown key */
    KMW_ERR_VALIDATION = 3, /* well-formed but out-of-range or inconsistent */
    KMW_ERR_NUMERIC = 4,    /* solver or geometry failure during a run */
    KMW_ERR_IO = 5,
    KMW_ERR_INTERNAL = 6
} kmw_status;

/* Message for the most recent failure on the calling thread ("" when none).
 * The pointer stays valid until the next call from the same thread. */
const char* kmw_last_error(void);

/* A parsed, validated run configuration. */
typedef struct kmw_config kmw_config;

/* Parse a JSON run configuration. Unknown keys are rejected. */
kmw_status kmw_config_parse(const char* text, kmw_config** out);
void kmw_config_free(kmw_config* cfg);

/* Normalized JSON with every default spelled out. */
kmw_status kmw_config_emit(const kmw_config* cfg, char** out);

/* Point file emission at a directory (created on demand at run time). */
kmw_status kmw_config_set_output_dir(kmw_config* cfg, const char* dir);

/* Run one subcommand: "evolve" | "reconstruct" | "quantize" | "verify".
 * exit_code receives the run's own result (0 = every check passed); message,
 * when non-NULL, receives a one-line summary. */
kmw_status kmw_run(const kmw_config* cfg, const char* subcommand, int threads,
                   int* exit_code, char** message);

void kmw_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* KMW_H */
