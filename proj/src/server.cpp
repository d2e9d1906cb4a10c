#include "forge/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/error.hpp"

namespace forge {
namespace {

using json = nlohmann::json;

std::string dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string_view protocol_kind(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::range:
    case ErrorKind::domain: return "internal";
    default: return "reference";
  }
}

// Request-shape failure; reported with kind "protocol".
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const json& field(const json& req, const char* name, json::value_t type, const char* type_name) {
  auto it = req.find(name);
  if (it == req.end()) throw ProtocolError(std::string("missing field \"") + name + "\"");
  if (it->type() != type)
    throw ProtocolError(std::string("field \"") + name + "\" must be " + type_name);
  return *it;
}

std::set<std::string> string_set(const json& sel, const char* name) {
  std::set<std::string> out;
  auto it = sel.find(name);
  if (it == sel.end()) return out;
  if (!it->is_array()) throw ProtocolError(std::string("selection.") + name + " must be an array");
  for (const auto& v : *it) {
    if (!v.is_string())
      throw ProtocolError(std::string("selection.") + name + " must contain strings");
    out.insert(v.get<std::string>());
  }
  return out;
}

bool flag(const json& sel, const char* name) {
  auto it = sel.find(name);
  if (it == sel.end()) return false;
  if (!it->is_boolean()) throw ProtocolError(std::string("selection.") + name + " must be a boolean");
  return it->get<bool>();
}

Selection selection_from(const json& req) {
  Selection sel;
  auto it = req.find("selection");
  if (it == req.end()) {
    sel.all = true;
    return sel;
  }
  if (!it->is_object()) throw ProtocolError("field \"selection\" must be an object");
  sel.all = flag(*it, "all");
  sel.requirements = flag(*it, "requirements");
  sel.include_groups = string_set(*it, "include_groups");
  sel.exclude_groups = string_set(*it, "exclude_groups");
  string_set(*it, "sessions");  // validates element types
  // Explicit sessions keep request order.
  if (auto s = it->find("sessions"); s != it->end())
    for (const auto& v : *s) sel.sessions.push_back(v.get<std::string>());
  return sel;
}

bool exported(NodeStatus s) { return s == NodeStatus::committed || s == NodeStatus::purged; }

}  // namespace

// ---------------------------------------------------------------------------
// Session

class Session::Events : public EngineObserver {
 public:
  explicit Events(Emit& emit) : emit_(emit) {}

  void on_status(const TheoryName& t, NodeStatus s, std::uint64_t version) override {
    emit_(dump({{"event", "node_status"}, {"theory", t}, {"status", to_string(s)},
                {"version", version}}));
  }
  void on_committed(const TheoryName& t, std::size_t triples) override {
    emit_(dump({{"event", "committed"}, {"theory", t}, {"triples", triples}}));
  }
  void on_timing(const TheoryName& t, const Timing& timing) override {
    emit_(dump({{"event", "timing"}, {"theory", t}, {"elapsed_ms", timing.elapsed_ms},
                {"cpu_ms", timing.cpu_ms}}));
  }
  void on_build_finished(const BuildSummary& s) override {
    emit_(dump({{"event", "build_finished"}, {"ok", s.ok}, {"failed", s.failed},
                {"elapsed_ms", s.elapsed_ms}, {"cpu_ms", s.cpu_ms}}));
  }

 private:
  Emit& emit_;
};

Session::Session(ServerConfig cfg, Emit emit)
    : cfg_(std::move(cfg)), emit_(std::move(emit)), events_(std::make_unique<Events>(emit_)) {}

Session::~Session() = default;

bool Session::handle_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  json id = nullptr;
  bool has_id = false;
  auto error = [&](std::string_view kind, const std::string& message) {
    emit_(dump({{"result", "error"}, {"id", id}, {"kind", kind}, {"message", message}}));
  };
  auto ok = [&](json fields) {
    json reply = {{"result", "ok"}};
    if (has_id) reply["id"] = id;
    for (auto& [k, v] : fields.items()) reply[k] = std::move(v);
    emit_(dump(reply));
  };

  json req;
  try {
    req = json::parse(line);
  } catch (const json::parse_error& e) {
    error("parse", e.what());
    return true;
  }
  if (!req.is_object()) {
    error("protocol", "request must be a JSON object");
    return true;
  }
  if (auto it = req.find("id"); it != req.end()) {
    id = *it;
    has_id = true;
  }

  try {
    const auto& command = field(req, "command", json::value_t::string, "a string").get_ref<const std::string&>();
    std::shared_ptr<Engine> engine;
    {
      std::lock_guard lock(mu_);
      engine = engine_;
    }
    if (command == "echo") {
      ok({{"payload", req.contains("payload") ? req["payload"] : json(nullptr)}});
    } else if (command == "load") {
      const auto& dir = field(req, "dir", json::value_t::string, "a string").get<std::string>();
      auto sel = selection_from(req);
      std::filesystem::path out = cfg_.out_dir;
      if (auto it = req.find("out"); it != req.end()) {
        if (!it->is_string()) throw ProtocolError("field \"out\" must be a string");
        out = it->get<std::string>();
      }
      auto corpus = load_corpus(dir);
      auto p = plan(corpus.catalog, sel, corpus.sources);
      auto store = Store::shared(out);
      auto consumer = std::make_unique<StoreConsumer>(store);
      auto fresh = std::make_shared<Engine>(std::move(p), cfg_.engine, consumer.get(), events_.get());
      {
        std::lock_guard lock(mu_);
        engine_ = fresh;
        store_ = store;
        consumer_ = std::move(consumer);
      }
      const auto& g = fresh->plan().theory_graph;
      ok({{"nodes", g.size()}, {"edges", g.edge_count()},
          {"sessions", fresh->plan().selected_sessions}});
      fresh->run();
    } else if (command == "edit") {
      const auto& theory = field(req, "theory", json::value_t::string, "a string").get<std::string>();
      const auto& source = field(req, "source", json::value_t::string, "a string").get<std::string>();
      if (!engine) throw ProtocolError("edit before load");
      auto invalid = engine->apply_edit(theory, source);
      std::vector<std::string> list;
      for (const auto& t : engine->states())
        if (invalid.count(t.node)) list.push_back(t.node);
      ok({{"invalidated", list}});
      if (!invalid.empty()) engine->run();
    } else if (command == "purge") {
      if (!engine) throw ProtocolError("purge before load");
      ok({{"purged", engine->purge()}});
    } else if (command == "export_status") {
      json statuses = json::array();
      if (engine)
        for (const auto& s : engine->states())
          statuses.push_back({{"theory", s.node}, {"status", to_string(s.status)},
                              {"version", s.version}});
      ok({{"statuses", statuses}});
    } else if (command == "shutdown") {
      ok(json::object());
      return false;
    } else {
      throw ProtocolError("unknown command \"" + command + "\"");
    }
  } catch (const ProtocolError& e) {
    error("protocol", e.what());
  } catch (const json::exception& e) {
    error("protocol", e.what());
  } catch (const Error& e) {
    error(protocol_kind(e.kind()), e.what());
  } catch (const std::exception& e) {
    error("internal", e.what());
  }
  return true;
}

HttpResponse Session::http_get(std::string_view path) const {
  std::shared_ptr<Engine> engine;
  std::shared_ptr<Store> store;
  {
    std::lock_guard lock(mu_);
    engine = engine_;
    store = store_;
  }
  auto not_found = HttpResponse{404, "text/plain", "not found\n"};
  if (path == "/theories") {
    json list = json::array();
    if (engine) {
      std::vector<std::string> names;
      for (const auto& s : engine->states())
        if (exported(s.status)) names.push_back(s.node);
      std::sort(names.begin(), names.end());
      list = names;
    }
    return {200, "application/json", dump(list) + "\n"};
  }
  if (path == "/rdf/corpus.nt") {
    if (!store) return not_found;
    try {
      return {200, "application/n-triples", read_file(store->corpus_path())};
    } catch (const Error&) {
      return not_found;
    }
  }
  constexpr std::string_view prefix = "/theory/";
  if (path.substr(0, prefix.size()) == prefix && engine && store) {
    auto rest = path.substr(prefix.size());
    for (auto [suffix, type] : {std::pair<std::string_view, const char*>{".omdoc.xml", "application/xml"},
                                {".markup.json", "application/json"}}) {
      if (rest.size() <= suffix.size() || rest.substr(rest.size() - suffix.size()) != suffix)
        continue;
      std::string theory(rest.substr(0, rest.size() - suffix.size()));
      auto st = engine->state(theory);
      if (!st || !exported(st->status)) return not_found;
      const auto& session = engine->plan().owner(theory);
      auto file = suffix == ".omdoc.xml" ? store->omdoc_path(session, theory)
                                         : store->markup_path(session, theory);
      try {
        return {200, type, read_file(file)};
      } catch (const Error&) {
        return not_found;
      }
    }
  }
  return not_found;
}

// ---------------------------------------------------------------------------
// Server

namespace {

void send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n <= 0) return;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

struct Server::Impl {
  struct Item {
    enum class Kind { line, disconnect, stop } kind;
    int fd = -1;
    std::string text;
  };

  ServerConfig cfg;
  int listen_fd = -1;
  std::atomic<bool> stopping{false};
  std::atomic<int> active_fd{-1};
  int current_fd = -1;  // fd replies go to; run loop only
  std::unique_ptr<Session> session;
  httplib::Server http;
  std::thread http_thread;
  std::thread accept_thread;
  std::vector<std::thread> readers;
  std::mutex qmu;
  std::condition_variable qcv;
  std::deque<Item> queue;

  void push(Item item) {
    {
      std::lock_guard lock(qmu);
      queue.push_back(std::move(item));
    }
    qcv.notify_one();
  }

  void read_loop(int fd) {
    std::string buffer;
    char chunk[4096];
    while (true) {
      auto n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buffer.find('\n')) != std::string::npos) {
        push({Item::Kind::line, fd, buffer.substr(0, nl)});
        buffer.erase(0, nl + 1);
      }
    }
    if (!buffer.empty()) push({Item::Kind::line, fd, buffer});
    push({Item::Kind::disconnect, fd, {}});
  }

  void accept_loop() {
    while (!stopping) {
      pollfd pfd{listen_fd, POLLIN, 0};
      if (::poll(&pfd, 1, 50) <= 0) continue;
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      if (active_fd.load() != -1 || stopping) {
        send_all(fd, dump({{"result", "error"}, {"id", nullptr}, {"kind", "protocol"},
                           {"message", "another control connection is active"}}) + "\n");
        ::close(fd);
        continue;
      }
      active_fd = fd;
      readers.emplace_back([this, fd] { read_loop(fd); });
    }
  }
};

Server::Server(ServerConfig cfg) : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  im.cfg = std::move(cfg);
  im.session = std::make_unique<Session>(im.cfg, [&im](const std::string& line) {
    if (im.current_fd >= 0) send_all(im.current_fd, line + "\n");
  });

  im.listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (im.listen_fd < 0) throw Error(ErrorKind::storage, "socket: " + std::string(std::strerror(errno)));
  int one = 1;
  ::setsockopt(im.listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(im.cfg.port);
  if (::inet_pton(AF_INET, im.cfg.host.c_str(), &addr.sin_addr) != 1) {
    ::close(im.listen_fd);
    throw Error(ErrorKind::storage, "invalid host " + im.cfg.host);
  }
  if (::bind(im.listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(im.listen_fd, 8) != 0) {
    auto msg = std::string(std::strerror(errno));
    ::close(im.listen_fd);
    throw Error(ErrorKind::storage,
                "cannot bind " + im.cfg.host + ":" + std::to_string(im.cfg.port) + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(im.listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  if (im.cfg.http_port) {
    Session* session = im.session.get();
    im.http.Get(R"(/.*)", [session](const httplib::Request& req, httplib::Response& res) {
      auto r = session->http_get(req.path);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    });
    int hp = *im.cfg.http_port;
    if (hp == 0) {
      hp = im.http.bind_to_any_port(im.cfg.host);
    } else if (!im.http.bind_to_port(im.cfg.host, hp)) {
      hp = -1;
    }
    if (hp < 0) {
      ::close(im.listen_fd);
      throw Error(ErrorKind::storage, "cannot bind HTTP port " + std::to_string(*im.cfg.http_port));
    }
    http_port_ = static_cast<std::uint16_t>(hp);
    im.http_thread = std::thread([&im] { im.http.listen_after_bind(); });
    im.http.wait_until_ready();
  }
}

Server::~Server() {
  stop();
  auto& im = *impl_;
  if (im.accept_thread.joinable()) im.accept_thread.join();
  int fd = im.active_fd.exchange(-1);
  if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
  for (auto& r : im.readers)
    if (r.joinable()) r.join();
  if (fd >= 0) ::close(fd);
  if (im.http_thread.joinable()) {
    im.http.stop();
    im.http_thread.join();
  }
  if (im.listen_fd >= 0) ::close(im.listen_fd);
}

void Server::stop() {
  impl_->stopping = true;
  impl_->push({Impl::Item::Kind::stop, -1, {}});
}

void Server::run() {
  auto& im = *impl_;
  im.accept_thread = std::thread([&im] { im.accept_loop(); });
  while (true) {
    Impl::Item item;
    {
      std::unique_lock lock(im.qmu);
      im.qcv.wait(lock, [&] { return !im.queue.empty(); });
      item = std::move(im.queue.front());
      im.queue.pop_front();
    }
    if (item.kind == Impl::Item::Kind::stop) break;
    if (item.fd != im.active_fd.load()) continue;  // stale connection
    if (item.kind == Impl::Item::Kind::disconnect) {
      im.active_fd = -1;
      ::close(item.fd);
      continue;
    }
    im.current_fd = item.fd;
    bool keep = im.session->handle_line(item.text);
    im.current_fd = -1;
    if (!keep) {
      im.stopping = true;
      ::shutdown(item.fd, SHUT_RDWR);
      break;
    }
  }
  im.stopping = true;
  if (im.accept_thread.joinable()) im.accept_thread.join();
}

}  // namespace forge
