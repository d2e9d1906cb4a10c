/* C interface to the forge build engine.
 *
 * All objects are opaque handles created by a *_open / *_create call and
 * released by the matching *_close / *_free / *_destroy. Every fallible call
 * returns a forge_status; on failure forge_last_error() describes the
 * problem (thread-local, valid until the next call on the same thread).
 * Strings returned through char** are owned by the caller and released with
 * forge_string_free.
 */
#ifndef FORGE_H
#define FORGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FORGE_API __declspec(dllexport)
#elif defined(FORGE_BUILDING_LIBRARY)
#define FORGE_API __attribute__((visibility("default")))
#else
#define FORGE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum forge_status {
  FORGE_OK = 0,
  FORGE_ERR_INVALID_ARGUMENT = 1,
  FORGE_ERR_IO = 2,
  FORGE_ERR_SYNTAX = 3,
  FORGE_ERR_SEMANTIC = 4,
  FORGE_ERR_REFERENCE = 5,
  FORGE_ERR_CYCLE = 6,
  FORGE_ERR_SCOPE = 7,
  FORGE_ERR_NOTHING_SELECTED = 8,
  FORGE_ERR_DOMAIN = 9,
  FORGE_ERR_INTERNAL = 10
} forge_status;

typedef struct forge_corpus forge_corpus;
typedef struct forge_report forge_report;
typedef struct forge_session forge_session;
typedef struct forge_server forge_server;

typedef struct forge_selection {
  const char* const* include_groups;
  size_t include_count;
  const char* const* exclude_groups;
  size_t exclude_count;
  const char* const* sessions;
  size_t session_count;
  int all;
  int requirements;
} forge_selection;

typedef struct forge_engine_config {
  unsigned workers;
  unsigned purge_watermark;
  int realtime;
} forge_engine_config;

typedef struct forge_server_config {
  const char* host;   /* NULL for 127.0.0.1 */
  uint16_t port;      /* 0 picks an ephemeral port */
  int enable_http;
  uint16_t http_port; /* used when enable_http; 0 picks an ephemeral port */
  const char* out_dir;
  forge_engine_config engine;
} forge_server_config;

FORGE_API const char* forge_last_error(void);
FORGE_API const char* forge_status_name(forge_status status);
FORGE_API forge_engine_config forge_engine_config_default(void);
FORGE_API void forge_string_free(char* s);

/* cpu / elapsed; FORGE_ERR_DOMAIN unless elapsed > 0. */
FORGE_API forge_status forge_factor(double elapsed, double cpu, double* out);

/* Corpus: a directory with a ROOT catalog and <Theory>.thy files. */
FORGE_API forge_status forge_corpus_open(const char* dir, forge_corpus** out);
FORGE_API void forge_corpus_close(forge_corpus* corpus);
FORGE_API size_t forge_corpus_session_count(const forge_corpus* corpus);
FORGE_API size_t forge_corpus_theory_count(const forge_corpus* corpus);

/* Statistics as JSON and CSV text. Either output pointer may be NULL. */
FORGE_API forge_status forge_stats(const forge_corpus* corpus, char** json, char** csv);

/* One-shot build into out_dir (export store plus log/build.json). A build
 * whose nodes fail still returns FORGE_OK; inspect the report. */
FORGE_API forge_status forge_build(const forge_corpus* corpus, const forge_selection* selection,
                                   const forge_engine_config* config, const char* out_dir,
                                   forge_report** out);

/* Long-lived engine session: load once, then run/edit/purge. */
FORGE_API forge_status forge_session_open(const forge_corpus* corpus,
                                          const forge_selection* selection,
                                          const forge_engine_config* config, const char* out_dir,
                                          forge_session** out);
FORGE_API forge_status forge_session_run(forge_session* session, forge_report** out);
/* *invalidated receives a JSON array of theory names. */
FORGE_API forge_status forge_session_edit(forge_session* session, const char* theory,
                                          const char* source, size_t source_len,
                                          char** invalidated);
FORGE_API forge_status forge_session_purge(forge_session* session, size_t* purged);
FORGE_API size_t forge_session_node_count(const forge_session* session);
FORGE_API void forge_session_close(forge_session* session);

FORGE_API int forge_report_all_ok(const forge_report* report);
FORGE_API size_t forge_report_ok_count(const forge_report* report);
FORGE_API size_t forge_report_failed_count(const forge_report* report);
FORGE_API size_t forge_report_committed_count(const forge_report* report);
FORGE_API size_t forge_report_purged_count(const forge_report* report);
FORGE_API size_t forge_report_resident_count(const forge_report* report);
FORGE_API double forge_report_factor(const forge_report* report);
/* log/build.json text, owned by the report. */
FORGE_API const char* forge_report_log(const forge_report* report);
/* Human-readable diagnostics of failed nodes, owned by the report. */
FORGE_API const char* forge_report_diagnostics(const forge_report* report);
FORGE_API void forge_report_free(forge_report* report);

FORGE_API forge_status forge_server_create(const forge_server_config* config, forge_server** out);
FORGE_API uint16_t forge_server_port(const forge_server* server);
FORGE_API uint16_t forge_server_http_port(const forge_server* server);
/* Blocks until a shutdown request or forge_server_stop. */
FORGE_API forge_status forge_server_run(forge_server* server);
FORGE_API void forge_server_stop(forge_server* server);
FORGE_API void forge_server_destroy(forge_server* server);

#ifdef __cplusplus
}
#endif

#endif /* FORGE_H */
