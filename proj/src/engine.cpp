#include "forge/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <nlohmann/json.hpp>
#include <queue>
#include <thread>

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/syntax.hpp"

namespace forge {
namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t ms_since(Clock::time_point t0, Clock::time_point t1) {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());
}

bool succeeded(NodeStatus s) {
  return s == NodeStatus::finished_ok || s == NodeStatus::committed || s == NodeStatus::purged;
}

bool terminal(NodeStatus s) { return succeeded(s) || s == NodeStatus::finished_failed; }

}  // namespace

// ---------------------------------------------------------------------------
// Environment

void Environment::add(EnvEntry entry) {
  if (by_long_.count(entry.long_name))
    throw Error(ErrorKind::semantic, "duplicate declaration " + entry.long_name);
  std::size_t idx = entries_.size();
  by_long_[entry.long_name] = idx;
  latest_[entry.name] = idx;
  if (entry.kind == DeclKind::theorem) latest_theorem_[entry.name] = idx;
  entries_.push_back(std::move(entry));
}

void Environment::append(const EnvDelta& delta) {
  for (const auto& e : delta) add(e);
}

const EnvEntry* Environment::find(std::string_view long_name) const {
  auto it = by_long_.find(long_name);
  return it == by_long_.end() ? nullptr : &entries_[it->second];
}

const EnvEntry* Environment::resolve(std::string_view name) const {
  auto it = latest_.find(name);
  return it == latest_.end() ? nullptr : &entries_[it->second];
}

const EnvEntry* Environment::resolve_fact(std::string_view name) const {
  auto it = latest_theorem_.find(name);
  return it == latest_theorem_.end() ? nullptr : &entries_[it->second];
}

bool CheckResult::ok() const {
  return std::none_of(diagnostics.begin(), diagnostics.end(),
                      [](const Diagnostic& d) { return d.severity == Severity::error; });
}

CheckResult check_theory(const TheoryDoc& doc, const Environment& env) {
  CheckResult out;
  // Own declarations shadow everything imported.
  Environment own;
  auto resolve = [&](const std::string& name, bool fact) -> std::optional<Target> {
    const EnvEntry* e = fact ? own.resolve_fact(name) : own.resolve(name);
    if (!e) e = fact ? env.resolve_fact(name) : env.resolve(name);
    if (!e) return std::nullopt;
    return Target{e->long_name, e->kind, e->pos};
  };

  for (std::size_t i = 0; i < doc.commands.size(); ++i) {
    const auto& cmd = doc.commands[i];
    if (!cmd.is_declaration()) continue;
    for (auto& occ : identifier_occurrences(cmd)) {
      auto target = resolve(occ.name, false);
      if (!target)
        out.diagnostics.push_back({occ.pos, Severity::error, "unresolved identifier " + occ.name});
      out.resolution.push_back({occ.name, occ.pos, i, false, std::move(target)});
    }
    if (auto* thm = std::get_if<Theorem>(&cmd.body)) {
      for (const auto& fact : thm->facts) {
        auto target = resolve(fact.name, true);
        if (!target)
          out.diagnostics.push_back({fact.pos, Severity::error, "unknown fact " + fact.name});
        out.resolution.push_back({fact.name, fact.pos, i, true, std::move(target)});
      }
    }
    EnvEntry entry{doc.name + "." + cmd.decl_name(), doc.name, cmd.decl_name(), cmd.decl_kind(),
                   cmd.name_pos};
    own.add(entry);
    out.delta.push_back(std::move(entry));
  }
  std::stable_sort(out.diagnostics.begin(), out.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.pos.start < b.pos.start; });
  out.markup = markup_of(doc, out.resolution);
  return out;
}

// ---------------------------------------------------------------------------
// Planning

const SessionName& BuildPlan::owner(const TheoryName& theory) const {
  auto it = catalog.theory_owner.find(theory);
  if (it == catalog.theory_owner.end())
    throw Error(ErrorKind::reference, "unknown theory " + theory);
  return it->second;
}

namespace {

std::uint64_t cost_of(std::string_view source, const TheoryName& theory) {
  try {
    return parse_theory(source, theory_file(theory)).declared_cost();
  } catch (const Error&) {
    return 0;
  }
}

// Validates one theory's imports against the catalog and selection.
void check_imports(const Catalog& catalog, const std::set<SessionName>& selected,
                   const TheoryName& theory, const std::vector<Import>& imports) {
  const auto& session = catalog.theory_owner.at(theory);
  auto ancestry = catalog.ancestry(session);
  for (const auto& imp : imports) {
    auto it = catalog.theory_owner.find(imp.name);
    if (it == catalog.theory_owner.end())
      throw SourceError(ErrorKind::reference, imp.pos,
                        "theory " + theory + " imports unknown theory " + imp.name);
    const auto& target = it->second;
    if (target != session && std::find(ancestry.begin(), ancestry.end(), target) == ancestry.end())
      throw SourceError(ErrorKind::scope, imp.pos,
                        "theory " + theory + " in session " + session + " imports " + imp.name +
                            " from session " + target + ", which is not an ancestor");
    if (!selected.count(target))
      throw SourceError(ErrorKind::reference, imp.pos,
                        "theory " + theory + " imports " + imp.name + " from unselected session " +
                            target);
  }
}

}  // namespace

BuildPlan plan(const Catalog& catalog, const Selection& sel,
               const std::map<TheoryName, Bytes>& sources) {
  auto sessions = session_graph(catalog);
  auto selected = select(catalog, sessions, sel);
  if (selected.empty()) throw Error(ErrorKind::empty, "nothing selected");
  for (const auto& s : selected) {
    const auto& spec = catalog.at(s);
    if (spec.parent && !selected.count(*spec.parent))
      throw Error(ErrorKind::reference,
                  "session " + s + " requires unselected parent session " + *spec.parent);
  }

  BuildPlan p;
  p.catalog = catalog;
  for (const auto& s : sessions.topo_order())
    if (selected.count(s)) p.selected_sessions.push_back(s);

  std::set<TheoryName> nodes;
  std::vector<std::pair<TheoryName, TheoryName>> edges;
  for (const auto& s : p.selected_sessions) {
    for (const auto& t : catalog.at(s).theories) {
      auto src = sources.find(t);
      if (src == sources.end())
        throw Error(ErrorKind::reference, "missing source for theory " + t + " of session " + s);
      auto header = parse_theory_header(src->second, theory_file(t));
      if (header.name != t)
        throw SourceError(ErrorKind::semantic, header.name_pos,
                          "file " + theory_file(t) + " declares theory " + header.name);
      check_imports(catalog, selected, t, header.imports);
      nodes.insert(t);
      for (const auto& imp : header.imports) edges.emplace_back(imp.name, t);
      p.sources[t] = src->second;
      p.initial_versions[t] = digest(src->second);
      p.declared_costs[t] = cost_of(src->second, t);
    }
  }
  p.theory_graph = DepGraph<TheoryName>::build(nodes, edges);
  return p;
}

// ---------------------------------------------------------------------------
// Scheduling arithmetic

bool ReadyOrder::operator()(const TheoryName& a, const TheoryName& b) const {
  auto ca = costs->count(a) ? costs->at(a) : 0;
  auto cb = costs->count(b) ? costs->at(b) : 0;
  if (ca != cb) return ca > cb;
  return a < b;
}

Schedule simulate_schedule(const DepGraph<TheoryName>& graph,
                           const std::map<TheoryName, std::uint64_t>& costs, unsigned workers) {
  if (workers == 0) throw Error(ErrorKind::domain, "workers must be positive");
  Schedule out;
  std::map<TheoryName, std::size_t> waiting;
  std::set<TheoryName, ReadyOrder> ready(ReadyOrder{&costs});
  for (const auto& n : graph.nodes()) {
    waiting[n] = graph.predecessors(n).size();
    if (waiting[n] == 0) ready.insert(n);
  }
  // (finish time, name) of running nodes.
  std::set<std::pair<std::uint64_t, TheoryName>> running;
  std::uint64_t now = 0;
  while (!ready.empty() || !running.empty()) {
    while (running.size() < workers && !ready.empty()) {
      auto n = *ready.begin();
      ready.erase(ready.begin());
      auto c = costs.count(n) ? costs.at(n) : 0;
      out.start[n] = now;
      out.order.push_back(n);
      running.emplace(now + c, n);
    }
    now = running.begin()->first;
    while (!running.empty() && running.begin()->first == now) {
      auto n = running.begin()->second;
      running.erase(running.begin());
      out.finish[n] = now;
      for (const auto& m : graph.successors(n))
        if (--waiting[m] == 0) ready.insert(m);
    }
  }
  out.makespan = now;
  return out;
}

std::uint64_t critical_path(const DepGraph<TheoryName>& graph,
                            const std::map<TheoryName, std::uint64_t>& costs) {
  std::map<TheoryName, std::uint64_t> longest;
  std::uint64_t best = 0;
  for (const auto& n : graph.topo_order()) {
    std::uint64_t before = 0;
    for (const auto& p : graph.predecessors(n)) before = std::max(before, longest[p]);
    longest[n] = before + (costs.count(n) ? costs.at(n) : 0);
    best = std::max(best, longest[n]);
  }
  return best;
}

MakespanBounds makespan_bounds(const DepGraph<TheoryName>& graph,
                               const std::map<TheoryName, std::uint64_t>& costs,
                               unsigned workers) {
  if (workers == 0) throw Error(ErrorKind::domain, "workers must be positive");
  std::uint64_t total = 0;
  for (const auto& n : graph.nodes()) {
    auto it = costs.find(n);
    if (it == costs.end()) throw Error(ErrorKind::reference, "no cost for node " + n);
    total += it->second;
  }
  std::uint64_t spread = (total + workers - 1) / workers;
  return {std::max(critical_path(graph, costs), spread), total};
}

double factor(double elapsed, double cpu) {
  if (!(elapsed > 0)) throw Error(ErrorKind::domain, "elapsed time must be positive");
  return cpu / elapsed;
}

std::string format_factor(double f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", f);
  return buf;
}

// ---------------------------------------------------------------------------
// Reports

bool BuildReport::all_ok() const {
  return std::all_of(nodes.begin(), nodes.end(),
                     [](const NodeReport& n) { return succeeded(n.status); });
}

double BuildReport::factor() const {
  return forge::factor(static_cast<double>(std::max<std::uint64_t>(summary.elapsed_ms, 1)),
                       static_cast<double>(summary.cpu_ms));
}

std::string build_log_json(const BuildReport& report, const BuildPlan& plan) {
  nlohmann::ordered_json sessions = nlohmann::ordered_json::array();
  std::map<SessionName, std::vector<const NodeReport*>> by_session;
  for (const auto& n : report.nodes) by_session[n.session].push_back(&n);
  for (const auto& s : plan.selected_sessions) {
    nlohmann::ordered_json theories = nlohmann::ordered_json::array();
    std::uint64_t cpu = 0, first = UINT64_MAX, last = 0;
    for (const auto* n : by_session[s]) {
      nlohmann::ordered_json t;
      t["name"] = n->theory;
      t["status"] = to_string(n->status);
      t["version"] = n->version;
      t["elapsed_ms"] = n->timing.elapsed_ms;
      t["cpu_ms"] = n->timing.cpu_ms;
      if (!n->diagnostics.empty()) {
        auto diags = nlohmann::ordered_json::array();
        for (const auto& d : n->diagnostics)
          diags.push_back(d.pos.file + ":" + std::to_string(d.pos.line) + ":" +
                          std::to_string(d.pos.column) + ": " + d.message);
        t["diagnostics"] = std::move(diags);
      }
      theories.push_back(std::move(t));
      if (n->ran) {
        cpu += n->timing.cpu_ms;
        first = std::min(first, n->timing.scheduled_at_ms);
        last = std::max(last, n->timing.finished_at_ms);
      }
    }
    nlohmann::ordered_json js;
    js["name"] = s;
    js["theories"] = std::move(theories);
    js["elapsed_ms"] = first == UINT64_MAX ? 0 : last - first;
    js["cpu_ms"] = cpu;
    sessions.push_back(std::move(js));
  }
  nlohmann::ordered_json totals;
  totals["elapsed_ms"] = std::max<std::uint64_t>(report.summary.elapsed_ms, 1);
  totals["cpu_ms"] = report.summary.cpu_ms;
  totals["factor"] = report.factor();
  totals["ok"] = report.summary.ok;
  totals["failed"] = report.summary.failed;
  totals["committed"] = report.committed_total;
  totals["purged"] = report.purged.size();
  totals["resident"] = report.resident;
  nlohmann::ordered_json j;
  j["sessions"] = std::move(sessions);
  j["totals"] = std::move(totals);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Engine

struct Engine::Node {
  NodeState state;
  std::string digest;
  std::optional<EnvDelta> delta;  // resident while not purged
};

struct Engine::Job {
  TheoryName theory;
  std::uint64_t version;
  std::string source;
  std::shared_ptr<const Environment> env;
};

struct Engine::Result {
  TheoryName theory;
  std::vector<Diagnostic> diagnostics;
  std::optional<EnvDelta> delta;
  std::optional<ExportPayload> exports;
  std::uint64_t measured_ms = 0;
  std::uint64_t wall_ms = 0;
  std::uint64_t declared_ms = 0;
  Clock::time_point started;
  Clock::time_point finished;
};

Engine::Engine(BuildPlan plan, EngineConfig cfg, CommitConsumer* consumer, EngineObserver* observer)
    : plan_(std::move(plan)), cfg_(cfg), consumer_(consumer), observer_(observer) {
  if (cfg_.workers == 0) throw Error(ErrorKind::domain, "workers must be at least 1");
  if (cfg_.purge_watermark == 0) throw Error(ErrorKind::domain, "purge watermark must be at least 1");
  topo_ = plan_.theory_graph.topo_order();
  for (const auto& t : topo_) {
    auto node = std::make_unique<Node>();
    node->state.node = t;
    node->digest = plan_.initial_versions.at(t);
    nodes_[t] = std::move(node);
  }
}

Engine::~Engine() = default;

void Engine::transition(Node& node, NodeStatus to) {
  {
    std::lock_guard lock(mu_);
    if (!legal_transition(node.state.status, to))
      throw std::logic_error("illegal transition " + std::string(to_string(node.state.status)) +
                             " -> " + std::string(to_string(to)) + " for " + node.state.node);
    node.state.status = to;
    if (to != NodeStatus::finished_ok && to != NodeStatus::committed) node.state.exports.reset();
  }
  if (observer_) observer_->on_status(node.state.node, to, node.state.version);
}

std::vector<NodeState> Engine::states() const {
  std::lock_guard lock(mu_);
  std::vector<NodeState> out;
  for (const auto& t : topo_) out.push_back(nodes_.at(t)->state);
  return out;
}

std::optional<NodeState> Engine::state(const TheoryName& theory) const {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(theory);
  if (it == nodes_.end()) return std::nullopt;
  return it->second->state;
}

std::size_t Engine::resident_count() const {
  std::lock_guard lock(mu_);
  std::size_t k = 0;
  for (const auto& [_, n] : nodes_)
    if (n->state.status == NodeStatus::finished_ok || n->state.status == NodeStatus::committed) ++k;
  return k;
}

bool Engine::purge_eligible(const TheoryName& theory) const {
  const auto& node = *nodes_.at(theory);
  if (node.state.status != NodeStatus::committed) return false;
  for (const auto& dep : plan_.theory_graph.successors(theory)) {
    auto s = nodes_.at(dep)->state.status;
    if (s != NodeStatus::committed && s != NodeStatus::purged && s != NodeStatus::finished_failed)
      return false;
  }
  return true;
}

std::vector<TheoryName> Engine::evict(bool force) {
  std::vector<TheoryName> victims;
  auto resident = resident_count();
  for (const auto& t : topo_) {
    if (!force && resident <= cfg_.purge_watermark) break;
    if (!purge_eligible(t)) continue;
    auto& node = *nodes_.at(t);
    node.delta.reset();
    transition(node, NodeStatus::purged);
    purged_log_.push_back(t);
    victims.push_back(t);
    --resident;
  }
  return victims;
}

std::vector<TheoryName> Engine::purge() { return evict(true); }

const EnvDelta& Engine::delta_for(const TheoryName& theory,
                                  std::map<TheoryName, EnvDelta>& reloaded) {
  auto& node = *nodes_.at(theory);
  if (node.delta) return *node.delta;
  if (auto it = reloaded.find(theory); it != reloaded.end()) return it->second;
  // Purged: re-derive from source. The result is identical to the original
  // check because it depends only on the source and the import environment.
  auto env = environment_for(theory, reloaded);
  auto doc = parse_theory(plan_.sources.at(theory), theory_file(theory));
  auto checked = check_theory(doc, *env);
  ++reloaded_;
  return reloaded[theory] = std::move(checked.delta);
}

std::shared_ptr<const Environment> Engine::environment_for(
    const TheoryName& theory, std::map<TheoryName, EnvDelta>& reloaded) {
  auto ancestors = plan_.theory_graph.ancestors(theory);
  auto env = std::make_shared<Environment>();
  for (const auto& t : topo_)
    if (ancestors.count(t)) env->append(delta_for(t, reloaded));
  return env;
}

BuildReport Engine::run() {
  const auto run_start = Clock::now();
  std::map<TheoryName, EnvDelta> reloaded;
  std::set<TheoryName> ran;
  const auto commits_before = commit_log_.size();
  const auto purges_before = purged_log_.size();

  // Worker pool state.
  std::mutex qmu;
  std::condition_variable job_cv, result_cv;
  std::deque<Job> jobs;
  std::deque<Result> results;
  bool closing = false;
  const bool realtime = cfg_.realtime;
  const auto& costs = plan_.declared_costs;

  auto work = [&] {
    while (true) {
      Job job;
      {
        std::unique_lock lock(qmu);
        job_cv.wait(lock, [&] { return closing || !jobs.empty(); });
        if (jobs.empty()) return;
        job = std::move(jobs.front());
        jobs.pop_front();
      }
      Result r;
      r.theory = job.theory;
      r.started = Clock::now();
      auto t0 = std::chrono::high_resolution_clock::now();
      try {
        auto doc = parse_theory(job.source, theory_file(job.theory));
        if (doc.name != job.theory) {
          r.diagnostics.push_back({doc.name_pos, Severity::error,
                                   "file " + theory_file(job.theory) + " declares theory " +
                                       doc.name});
        } else {
          auto checked = check_theory(doc, *job.env);
          r.declared_ms = doc.declared_cost();
          r.diagnostics = std::move(checked.diagnostics);
          bool ok = std::none_of(r.diagnostics.begin(), r.diagnostics.end(),
                                 [](const Diagnostic& d) { return d.severity == Severity::error; });
          if (ok) {
            r.delta = std::move(checked.delta);
            r.exports = make_payload(doc, checked.resolution);
          }
        }
      } catch (const SourceError& e) {
        r.diagnostics.push_back({e.position(), Severity::error, e.message()});
      } catch (const std::exception& e) {
        r.diagnostics.push_back({Position{theory_file(job.theory)}, Severity::error, e.what()});
      }
      auto t1 = std::chrono::high_resolution_clock::now();
      r.measured_ms = static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count());
      if (realtime && r.declared_ms)
        std::this_thread::sleep_for(std::chrono::milliseconds(r.declared_ms));
      r.finished = Clock::now();
      r.wall_ms = ms_since(r.started, r.finished);
      {
        std::lock_guard lock(qmu);
        results.push_back(std::move(r));
      }
      result_cv.notify_one();
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(cfg_.workers);
  for (unsigned i = 0; i < cfg_.workers; ++i) pool.emplace_back(work);
  auto shutdown_pool = [&] {
    {
      std::lock_guard lock(qmu);
      closing = true;
    }
    job_cv.notify_all();
    for (auto& th : pool)
      if (th.joinable()) th.join();
  };

  std::set<TheoryName, ReadyOrder> ready(ReadyOrder{&costs});
  std::set<TheoryName> waiting;  // pending, not yet ready
  for (const auto& t : topo_)
    if (nodes_.at(t)->state.status == NodeStatus::pending) waiting.insert(t);

  std::size_t in_flight = 0;
  BuildSummary summary;

  auto finish_failed = [&](Node& node, Diagnostic diag) {
    transition(node, NodeStatus::running);
    node.state.diagnostics = {std::move(diag)};
    node.state.timing = Timing{};
    node.state.timing.scheduled_at_ms = node.state.timing.finished_at_ms =
        ms_since(run_start, Clock::now());
    transition(node, NodeStatus::finished_failed);
    if (observer_) observer_->on_timing(node.state.node, node.state.timing);
    ++summary.failed;
    ran.insert(node.state.node);
  };

  // Moves waiting nodes whose imports are all terminal to ready, or fails
  // them if any import failed. Repeats until no change.
  auto promote = [&] {
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto it = waiting.begin(); it != waiting.end();) {
        const auto& t = *it;
        std::vector<TheoryName> failed_imports;
        bool all_terminal = true;
        for (const auto& p : plan_.theory_graph.predecessors(t)) {
          auto s = nodes_.at(p)->state.status;
          if (!terminal(s)) all_terminal = false;
          if (s == NodeStatus::finished_failed) failed_imports.push_back(p);
        }
        if (!all_terminal) {
          ++it;
          continue;
        }
        if (failed_imports.empty()) {
          ready.insert(t);
        } else {
          std::string msg = "skipped: failed import";
          for (const auto& f : failed_imports) msg += " " + f;
          finish_failed(*nodes_.at(t), Diagnostic{Position{theory_file(t)}, Severity::error, msg});
          changed = true;
        }
        it = waiting.erase(it);
      }
    }
  };

  try {
    promote();
    while (!ready.empty() || in_flight > 0) {
      while (in_flight < cfg_.workers && !ready.empty()) {
        auto t = *ready.begin();
        ready.erase(ready.begin());
        auto& node = *nodes_.at(t);
        Job job{t, node.state.version, plan_.sources.at(t), environment_for(t, reloaded)};
        node.state.timing = Timing{};
        node.state.timing.scheduled_at_ms = ms_since(run_start, Clock::now());
        transition(node, NodeStatus::running);
        {
          std::lock_guard lock(qmu);
          jobs.push_back(std::move(job));
        }
        job_cv.notify_one();
        ++in_flight;
      }
      if (in_flight == 0) break;
      Result r;
      {
        std::unique_lock lock(qmu);
        result_cv.wait(lock, [&] { return !results.empty(); });
        r = std::move(results.front());
        results.pop_front();
      }
      --in_flight;
      auto& node = *nodes_.at(r.theory);
      ran.insert(r.theory);
      auto& timing = node.state.timing;
      timing.cpu_ms = r.declared_ms + r.measured_ms;
      timing.elapsed_ms = realtime ? r.wall_ms : timing.cpu_ms;
      timing.scheduled_at_ms = ms_since(run_start, r.started);
      timing.finished_at_ms = ms_since(run_start, r.finished);
      node.state.diagnostics = std::move(r.diagnostics);
      if (r.exports) {
        {
          std::lock_guard lock(mu_);
          node.state.exports = std::move(r.exports);
        }
        node.delta = std::move(r.delta);
        transition(node, NodeStatus::finished_ok);
        if (observer_) observer_->on_timing(r.theory, timing);
        ++summary.ok;
        if (consumer_) consumer_->commit(plan_.owner(r.theory), r.theory, *node.state.exports);
        transition(node, NodeStatus::committed);
        commit_log_.push_back(r.theory);
        ++committed_total_;
        if (observer_) observer_->on_committed(r.theory, node.state.exports->triples.size());
        evict(false);
      } else {
        transition(node, NodeStatus::finished_failed);
        if (observer_) observer_->on_timing(r.theory, timing);
        ++summary.failed;
      }
      promote();
    }
  } catch (...) {
    shutdown_pool();
    throw;
  }
  shutdown_pool();

  auto report_out = report(ran);
  std::uint64_t cpu = 0;
  for (const auto& t : ran) cpu += nodes_.at(t)->state.timing.cpu_ms;
  summary.cpu_ms = cpu;

  // Virtual timeline over this run's nodes: in accounting mode it replaces
  // the wall clock, so reports stay meaningful without burning time.
  std::map<TheoryName, std::uint64_t> durations;
  for (const auto& t : ran) durations[t] = nodes_.at(t)->state.timing.cpu_ms;
  auto sim = simulate_schedule(plan_.theory_graph.restrict(ran), durations, cfg_.workers);
  report_out.simulated_makespan_ms = sim.makespan;
  if (realtime) {
    summary.elapsed_ms = ms_since(run_start, Clock::now());
  } else {
    summary.elapsed_ms = sim.makespan;
    for (auto& n : report_out.nodes) {
      if (!n.ran) continue;
      n.timing.scheduled_at_ms = sim.start[n.theory];
      n.timing.finished_at_ms = sim.finish[n.theory];
      nodes_.at(n.theory)->state.timing = n.timing;
    }
  }
  summary.elapsed_ms = std::max<std::uint64_t>(summary.elapsed_ms, 1);
  report_out.summary = summary;
  report_out.commit_order.assign(commit_log_.begin() + static_cast<std::ptrdiff_t>(commits_before),
                                 commit_log_.end());
  report_out.purged.assign(purged_log_.begin() + static_cast<std::ptrdiff_t>(purges_before),
                           purged_log_.end());
  report_out.reloaded = reloaded_;
  if (observer_) observer_->on_build_finished(summary);
  return report_out;
}

BuildReport Engine::report(const std::set<TheoryName>& ran) const {
  BuildReport r;
  std::lock_guard lock(mu_);
  for (const auto& t : topo_) {
    const auto& s = nodes_.at(t)->state;
    r.nodes.push_back(
        {t, plan_.owner(t), s.status, s.version, s.timing, s.diagnostics, ran.count(t) != 0});
    if (s.status == NodeStatus::finished_ok || s.status == NodeStatus::committed) ++r.resident;
  }
  r.committed_total = committed_total_;
  return r;
}

std::set<TheoryName> Engine::apply_edit(const TheoryName& theory, Bytes new_source) {
  auto it = nodes_.find(theory);
  if (it == nodes_.end()) throw Error(ErrorKind::reference, "unknown theory " + theory);
  auto new_digest = digest(new_source);
  if (new_digest == it->second->digest) return {};

  // Re-plan imports when the header parses; otherwise keep the old edges
  // and let the check report the syntax error.
  std::optional<DepGraph<TheoryName>> regraph;
  try {
    auto header = parse_theory_header(new_source, theory_file(theory));
    auto old_preds = plan_.theory_graph.predecessors(theory);
    std::set<TheoryName> new_preds;
    for (const auto& i : header.imports) new_preds.insert(i.name);
    if (new_preds != old_preds) {
      std::set<SessionName> selected(plan_.selected_sessions.begin(),
                                     plan_.selected_sessions.end());
      check_imports(plan_.catalog, selected, theory, header.imports);
      auto edges = plan_.theory_graph.edges();
      std::erase_if(edges, [&](const auto& e) { return e.second == theory; });
      for (const auto& p : new_preds) edges.emplace_back(p, theory);
      regraph = DepGraph<TheoryName>::build(plan_.theory_graph.nodes(), edges);
    }
  } catch (const SourceError& e) {
    if (e.kind() != ErrorKind::syntax && e.kind() != ErrorKind::lex &&
        e.kind() != ErrorKind::encoding && e.kind() != ErrorKind::semantic)
      throw;
  }
  if (regraph) {
    plan_.theory_graph = std::move(*regraph);
    topo_ = plan_.theory_graph.topo_order();
  }

  plan_.sources[theory] = std::move(new_source);
  plan_.declared_costs[theory] = cost_of(plan_.sources[theory], theory);
  it->second->digest = new_digest;

  auto invalid = plan_.theory_graph.descendants(theory);
  invalid.insert(theory);
  for (const auto& t : topo_) {
    if (!invalid.count(t)) continue;
    auto& node = *nodes_.at(t);
    auto was = node.state.status;
    if ((was == NodeStatus::committed || was == NodeStatus::purged) && consumer_)
      consumer_->retract(plan_.owner(t), t);
    {
      std::lock_guard lock(mu_);
      ++node.state.version;
      node.state.diagnostics.clear();
      node.state.timing = Timing{};
    }
    node.delta.reset();
    transition(node, NodeStatus::pending);
  }
  return invalid;
}

BuildReport run_build(const BuildPlan& plan, const EngineConfig& cfg, CommitConsumer& on_commit,
                      EngineObserver* observer) {
  Engine engine(plan, cfg, &on_commit, observer);
  return engine.run();
}

}  // namespace forge
