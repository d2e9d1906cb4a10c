#pragma once

// Headless session server: one control connection speaking line-delimited
// JSON over TCP, plus an optional read-only HTTP view of the export store.
//
// Requests (one JSON object per LF-terminated line, optional "id" echoed):
//   {"command":"echo","payload":X}
//   {"command":"load","dir":PATH,"selection":{...},"out":PATH?}
//   {"command":"edit","theory":NAME,"source":TEXT}
//   {"command":"purge"}
//   {"command":"export_status"}
//   {"command":"shutdown"}
// Events: node_status, committed, timing, build_finished.
// Errors: {"result":"error","id":...,"kind":parse|protocol|reference|internal,"message":...}

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "forge/engine.hpp"

namespace forge {

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  std::optional<std::uint16_t> http_port;
  std::filesystem::path out_dir = "forge-out";
  EngineConfig engine;
};

struct HttpResponse {
  int status = 404;
  std::string content_type = "text/plain";
  std::string body;
};

/// Protocol state for one server: transport-independent so it can be
/// driven directly by tests.
class Session {
 public:
  using Emit = std::function<void(const std::string& line)>;  // without LF

  Session(ServerConfig cfg, Emit emit);
  ~Session();

  /// Handles one request line, emitting the reply and any events. Returns
  /// false once a shutdown request has been answered.
  bool handle_line(std::string_view line);

  /// Read-only view used by the HTTP facet; safe to call concurrently with
  /// handle_line.
  HttpResponse http_get(std::string_view path) const;

 private:
  class Events;

  ServerConfig cfg_;
  Emit emit_;
  std::unique_ptr<Events> events_;
  mutable std::mutex mu_;  // guards engine_ and store_ pointers
  std::shared_ptr<Engine> engine_;
  std::shared_ptr<Store> store_;
  std::unique_ptr<StoreConsumer> consumer_;
};

/// TCP host for a Session. Construction binds (Error{storage} on failure);
/// run() serves until a shutdown request or stop().
class Server {
 public:
  explicit Server(ServerConfig cfg);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const { return port_; }
  std::optional<std::uint16_t> http_port() const { return http_port_; }

  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
  std::optional<std::uint16_t> http_port_;
};

}  // namespace forge
