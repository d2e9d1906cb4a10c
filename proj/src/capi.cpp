#include "forge/forge.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>

#include "forge/corpus.hpp"
#include "forge/engine.hpp"
#include "forge/error.hpp"
#include "forge/server.hpp"

struct forge_corpus {
  forge::Corpus corpus;
};

struct forge_report {
  forge::BuildReport report;
  std::string log;
  std::string diagnostics;
};

struct forge_session {
  std::shared_ptr<forge::Store> store;
  std::unique_ptr<forge::StoreConsumer> consumer;
  std::unique_ptr<forge::Engine> engine;
  std::filesystem::path out_dir;
};

struct forge_server {
  std::unique_ptr<forge::Server> server;
};

namespace {

thread_local std::string last_error;

forge_status status_of(forge::ErrorKind kind) {
  using K = forge::ErrorKind;
  switch (kind) {
    case K::range: return FORGE_ERR_INVALID_ARGUMENT;
    case K::lex:
    case K::encoding:
    case K::syntax: return FORGE_ERR_SYNTAX;
    case K::semantic: return FORGE_ERR_SEMANTIC;
    case K::reference: return FORGE_ERR_REFERENCE;
    case K::cycle: return FORGE_ERR_CYCLE;
    case K::scope: return FORGE_ERR_SCOPE;
    case K::domain: return FORGE_ERR_DOMAIN;
    case K::storage: return FORGE_ERR_IO;
    case K::empty: return FORGE_ERR_NOTHING_SELECTED;
  }
  return FORGE_ERR_INTERNAL;
}

template <class F>
forge_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return FORGE_OK;
  } catch (const forge::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    last_error = e.what();
    return FORGE_ERR_INTERNAL;
  }
}

forge_status invalid(const char* what) {
  last_error = what;
  return FORGE_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

forge::Selection to_selection(const forge_selection* sel) {
  forge::Selection out;
  if (!sel) {
    out.all = true;
    return out;
  }
  for (size_t i = 0; i < sel->include_count; ++i) out.include_groups.insert(sel->include_groups[i]);
  for (size_t i = 0; i < sel->exclude_count; ++i) out.exclude_groups.insert(sel->exclude_groups[i]);
  for (size_t i = 0; i < sel->session_count; ++i) out.sessions.emplace_back(sel->sessions[i]);
  out.all = sel->all != 0;
  out.requirements = sel->requirements != 0;
  return out;
}

forge::EngineConfig to_config(const forge_engine_config* cfg) {
  forge::EngineConfig out;
  if (cfg) {
    out.workers = cfg->workers;
    out.purge_watermark = cfg->purge_watermark;
    out.realtime = cfg->realtime != 0;
  }
  return out;
}

forge_report* make_report(forge::BuildReport report, const forge::BuildPlan& plan,
                          const std::filesystem::path& out_dir) {
  auto r = std::make_unique<forge_report>();
  r->log = forge::build_log_json(report, plan);
  for (const auto& n : report.nodes)
    for (const auto& d : n.diagnostics)
      r->diagnostics += d.pos.file + ":" + std::to_string(d.pos.line) + ":" +
                        std::to_string(d.pos.column) + ": " + d.message + "\n";
  forge::atomic_write(out_dir / "log" / "build.json", r->log);
  r->report = std::move(report);
  return r.release();
}

}  // namespace

extern "C" {

const char* forge_last_error(void) { return last_error.c_str(); }

const char* forge_status_name(forge_status status) {
  switch (status) {
    case FORGE_OK: return "ok";
    case FORGE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FORGE_ERR_IO: return "i/o error";
    case FORGE_ERR_SYNTAX: return "syntax error";
    case FORGE_ERR_SEMANTIC: return "semantic error";
    case FORGE_ERR_REFERENCE: return "reference error";
    case FORGE_ERR_CYCLE: return "cycle error";
    case FORGE_ERR_SCOPE: return "scope error";
    case FORGE_ERR_NOTHING_SELECTED: return "nothing selected";
    case FORGE_ERR_DOMAIN: return "domain error";
    case FORGE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

forge_engine_config forge_engine_config_default(void) {
  forge::EngineConfig d;
  return forge_engine_config{d.workers, d.purge_watermark, d.realtime ? 1 : 0};
}

void forge_string_free(char* s) { std::free(s); }

forge_status forge_factor(double elapsed, double cpu, double* out) {
  if (!out) return invalid("null output pointer");
  return guarded([&] { *out = forge::factor(elapsed, cpu); });
}

forge_status forge_corpus_open(const char* dir, forge_corpus** out) {
  if (!dir || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<forge_corpus>();
    c->corpus = forge::load_corpus(dir);
    *out = c.release();
  });
}

void forge_corpus_close(forge_corpus* corpus) { delete corpus; }

size_t forge_corpus_session_count(const forge_corpus* corpus) {
  return corpus ? corpus->corpus.catalog.sessions.size() : 0;
}

size_t forge_corpus_theory_count(const forge_corpus* corpus) {
  return corpus ? corpus->corpus.catalog.theory_owner.size() : 0;
}

forge_status forge_stats(const forge_corpus* corpus, char** json, char** csv) {
  if (!corpus) return invalid("null corpus");
  return guarded([&] {
    auto st = forge::corpus_stats(corpus->corpus);
    if (json) *json = dup_string(forge::stats_json(st));
    if (csv) *csv = dup_string(forge::stats_csv(st));
  });
}

forge_status forge_build(const forge_corpus* corpus, const forge_selection* selection,
                         const forge_engine_config* config, const char* out_dir,
                         forge_report** out) {
  if (!corpus || !out_dir || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    auto p = forge::plan(corpus->corpus.catalog, to_selection(selection), corpus->corpus.sources);
    forge::StoreConsumer consumer(forge::Store::shared(out_dir));
    auto report = forge::run_build(p, to_config(config), consumer);
    *out = make_report(std::move(report), p, out_dir);
  });
}

forge_status forge_session_open(const forge_corpus* corpus, const forge_selection* selection,
                                const forge_engine_config* config, const char* out_dir,
                                forge_session** out) {
  if (!corpus || !out_dir || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<forge_session>();
    s->out_dir = out_dir;
    s->store = forge::Store::shared(out_dir);
    s->consumer = std::make_unique<forge::StoreConsumer>(s->store);
    auto p = forge::plan(corpus->corpus.catalog, to_selection(selection), corpus->corpus.sources);
    s->engine = std::make_unique<forge::Engine>(std::move(p), to_config(config), s->consumer.get());
    *out = s.release();
  });
}

forge_status forge_session_run(forge_session* session, forge_report** out) {
  if (!session || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    auto report = session->engine->run();
    *out = make_report(std::move(report), session->engine->plan(), session->out_dir);
  });
}

forge_status forge_session_edit(forge_session* session, const char* theory, const char* source,
                                size_t source_len, char** invalidated) {
  if (!session || !theory || (!source && source_len)) return invalid("null argument");
  return guarded([&] {
    auto set = session->engine->apply_edit(theory, std::string(source ? source : "", source_len));
    if (invalidated) *invalidated = dup_string(nlohmann::json(set).dump());
  });
}

forge_status forge_session_purge(forge_session* session, size_t* purged) {
  if (!session) return invalid("null session");
  return guarded([&] {
    auto victims = session->engine->purge();
    if (purged) *purged = victims.size();
  });
}

size_t forge_session_node_count(const forge_session* session) {
  return session ? session->engine->plan().theory_graph.size() : 0;
}

void forge_session_close(forge_session* session) { delete session; }

int forge_report_all_ok(const forge_report* r) { return r && r->report.all_ok() ? 1 : 0; }
size_t forge_report_ok_count(const forge_report* r) { return r ? r->report.summary.ok : 0; }
size_t forge_report_failed_count(const forge_report* r) { return r ? r->report.summary.failed : 0; }
size_t forge_report_committed_count(const forge_report* r) {
  return r ? r->report.committed_total : 0;
}
size_t forge_report_purged_count(const forge_report* r) { return r ? r->report.purged.size() : 0; }
size_t forge_report_resident_count(const forge_report* r) { return r ? r->report.resident : 0; }
double forge_report_factor(const forge_report* r) { return r ? r->report.factor() : 0.0; }
const char* forge_report_log(const forge_report* r) { return r ? r->log.c_str() : ""; }
const char* forge_report_diagnostics(const forge_report* r) {
  return r ? r->diagnostics.c_str() : "";
}
void forge_report_free(forge_report* r) { delete r; }

forge_status forge_server_create(const forge_server_config* config, forge_server** out) {
  if (!config || !out) return invalid("null argument");
  *out = nullptr;
  return guarded([&] {
    forge::ServerConfig cfg;
    if (config->host) cfg.host = config->host;
    cfg.port = config->port;
    if (config->enable_http) cfg.http_port = config->http_port;
    if (config->out_dir) cfg.out_dir = config->out_dir;
    cfg.engine = to_config(&config->engine);
    auto s = std::make_unique<forge_server>();
    s->server = std::make_unique<forge::Server>(std::move(cfg));
    *out = s.release();
  });
}

uint16_t forge_server_port(const forge_server* s) { return s ? s->server->port() : 0; }

uint16_t forge_server_http_port(const forge_server* s) {
  return s && s->server->http_port() ? *s->server->http_port() : 0;
}

forge_status forge_server_run(forge_server* s) {
  if (!s) return invalid("null server");
  return guarded([&] { s->server->run(); });
}

void forge_server_stop(forge_server* s) {
  if (s) s->server->stop();
}

void forge_server_destroy(forge_server* s) { delete s; }

}  // extern "C"
