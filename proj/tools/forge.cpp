// forge: command-line front end over the C API.
//
//   forge build  [-d DIR] [-o OUT] [-j K] [-g GROUP]... [-x GROUP]... [-a] [-R] [SESSIONS...]
//   forge import (same flags, plus -W WATERMARK)
//   forge server -p PORT [-q HTTP_PORT] [-j K] [-o OUT]
//   forge stats  [-d DIR] [-f json|csv|both]
//
// Exit status: 0 success, 1 build or plan failure, 2 usage error.

#include <csignal>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forge/forge.h"

namespace {

constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct SelectFlags {
  std::string dir = ".";
  std::string out = "forge-out";
  unsigned workers = 1;
  unsigned watermark = 64;
  bool realtime = false;
  std::vector<std::string> include;
  std::vector<std::string> exclude;
  bool all = false;
  bool requirements = false;
  std::vector<std::string> sessions;
};

void add_select_flags(CLI::App* cmd, SelectFlags& f) {
  cmd->add_option("-d", f.dir, "corpus directory holding ROOT");
  cmd->add_option("-o", f.out, "output directory");
  cmd->add_option("-j", f.workers, "worker threads")->check(CLI::Range(1u, 256u));
  cmd->add_option("-g", f.include, "include session group")->allow_extra_args(false);
  cmd->add_option("-x", f.exclude, "exclude session group")->allow_extra_args(false);
  cmd->add_flag("-a", f.all, "select all sessions");
  cmd->add_flag("-R", f.requirements, "add ancestor sessions");
  cmd->add_flag("-r", f.realtime, "report wall-clock timings");
  cmd->add_option("sessions", f.sessions, "sessions to build");
}

struct CStrings {
  std::vector<const char*> ptrs;
  explicit CStrings(const std::vector<std::string>& v) {
    for (const auto& s : v) ptrs.push_back(s.c_str());
  }
};

int fail(const char* what) {
  std::string detail = forge_last_error();
  if (detail.empty() || detail == what)
    std::fprintf(stderr, "forge: %s\n", what);
  else
    std::fprintf(stderr, "forge: %s: %s\n", what, detail.c_str());
  return kFailure;
}

int run_build(const SelectFlags& f, bool as_session) {
  forge_corpus* corpus = nullptr;
  if (forge_corpus_open(f.dir.c_str(), &corpus) != FORGE_OK) return fail("cannot load corpus");

  CStrings inc(f.include), exc(f.exclude), ses(f.sessions);
  forge_selection sel{inc.ptrs.data(), inc.ptrs.size(), exc.ptrs.data(), exc.ptrs.size(),
                      ses.ptrs.data(), ses.ptrs.size(), f.all,           f.requirements};
  forge_engine_config cfg = forge_engine_config_default();
  cfg.workers = f.workers;
  cfg.purge_watermark = f.watermark;
  cfg.realtime = f.realtime;

  forge_report* report = nullptr;
  forge_status st;
  if (as_session) {
    forge_session* session = nullptr;
    st = forge_session_open(corpus, &sel, &cfg, f.out.c_str(), &session);
    if (st == FORGE_OK) {
      st = forge_session_run(session, &report);
      forge_session_close(session);
    }
  } else {
    st = forge_build(corpus, &sel, &cfg, f.out.c_str(), &report);
  }
  forge_corpus_close(corpus);
  if (st != FORGE_OK) return fail(forge_status_name(st));

  std::fputs(forge_report_diagnostics(report), stderr);
  if (as_session)
    std::printf("committed %zu purged %zu resident %zu\n", forge_report_committed_count(report),
                forge_report_purged_count(report), forge_report_resident_count(report));
  std::printf("ok %zu failed %zu factor %.1f\n", forge_report_ok_count(report),
              forge_report_failed_count(report), forge_report_factor(report));
  int rc = forge_report_all_ok(report) ? 0 : kFailure;
  forge_report_free(report);
  return rc;
}

forge_server* running_server = nullptr;

void on_signal(int) {
  if (running_server) forge_server_stop(running_server);
}

int run_server(uint16_t port, int http_port, unsigned workers, const std::string& out) {
  forge_server_config cfg{};
  cfg.port = port;
  cfg.enable_http = http_port >= 0;
  cfg.http_port = http_port >= 0 ? static_cast<uint16_t>(http_port) : 0;
  cfg.out_dir = out.c_str();
  cfg.engine = forge_engine_config_default();
  cfg.engine.workers = workers;

  forge_server* server = nullptr;
  if (forge_server_create(&cfg, &server) != FORGE_OK) return fail("cannot start server");
  std::printf("listening on %u\n", forge_server_port(server));
  if (cfg.enable_http) std::printf("http on %u\n", forge_server_http_port(server));
  std::fflush(stdout);

  running_server = server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  forge_status st = forge_server_run(server);
  running_server = nullptr;
  forge_server_destroy(server);
  return st == FORGE_OK ? 0 : fail("server stopped");
}

int run_stats(const std::string& dir, const std::string& format) {
  forge_corpus* corpus = nullptr;
  if (forge_corpus_open(dir.c_str(), &corpus) != FORGE_OK) return fail("cannot load corpus");
  char* json = nullptr;
  char* csv = nullptr;
  forge_status st = forge_stats(corpus, &json, &csv);
  forge_corpus_close(corpus);
  if (st != FORGE_OK) return fail("stats");
  if (format != "csv") std::fputs(json, stdout);
  if (format == "both") std::fputs("\n", stdout);
  if (format != "json") std::fputs(csv, stdout);
  forge_string_free(json);
  forge_string_free(csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: theory corpus builder"};
  app.require_subcommand(1);

  SelectFlags build_flags, import_flags;
  auto* build = app.add_subcommand("build", "build selected sessions into an export store");
  add_select_flags(build, build_flags);
  auto* import = app.add_subcommand("import", "build through a headless engine session");
  add_select_flags(import, import_flags);
  import->add_option("-W", import_flags.watermark, "purge watermark")->check(CLI::Range(1u, 1u << 20));

  uint16_t port = 0;
  int http_port = -1;
  unsigned server_workers = 1;
  std::string server_out = "forge-out";
  auto* server = app.add_subcommand("server", "serve the line-delimited JSON protocol");
  server->add_option("-p", port, "TCP port (0 picks one)");
  server->add_option("-q", http_port, "HTTP port for the read-only view")->check(CLI::Range(0, 65535));
  server->add_option("-j", server_workers, "worker threads")->check(CLI::Range(1u, 256u));
  server->add_option("-o", server_out, "output directory");

  std::string stats_dir = ".";
  std::string stats_format = "both";
  auto* stats = app.add_subcommand("stats", "print corpus statistics");
  stats->add_option("-d", stats_dir, "corpus directory holding ROOT");
  stats->add_option("-f", stats_format, "output format")
      ->check(CLI::IsMember({"json", "csv", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  if (*build) return run_build(build_flags, false);
  if (*import) return run_build(import_flags, true);
  if (*server) return run_server(port, http_port, server_workers, server_out);
  return run_stats(stats_dir, stats_format);
}
