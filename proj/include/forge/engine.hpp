#pragma once

// Build engine: plans a theory sub-graph, checks theories over a bounded
// worker pool, commits finished nodes to a consumer and evicts committed
// nodes once their dependents no longer need them.

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "forge/depgraph.hpp"
#include "forge/export.hpp"
#include "forge/model.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Name resolution environment

struct EnvEntry {
  std::string long_name;  // Theory.name
  TheoryName theory;
  std::string name;
  DeclKind kind;
  Position pos;
};

using EnvDelta = std::vector<EnvEntry>;

/// Ordered set of visible declarations; later entries shadow earlier ones
/// for short-name lookup.
class Environment {
 public:
  void add(EnvEntry entry);
  void append(const EnvDelta& delta);

  const EnvEntry* find(std::string_view long_name) const;
  /// Most recently added declaration with this short name.
  const EnvEntry* resolve(std::string_view name) const;
  /// Most recently added theorem with this short name.
  const EnvEntry* resolve_fact(std::string_view name) const;

  const std::vector<EnvEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<EnvEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_long_;
  std::map<std::string, std::size_t, std::less<>> latest_;
  std::map<std::string, std::size_t, std::less<>> latest_theorem_;
};

struct CheckResult {
  EnvDelta delta;
  Resolution resolution;
  MarkupTree markup;
  std::vector<Diagnostic> diagnostics;

  bool ok() const;
};

/// Processes commands in order. Identifiers in payloads resolve against this
/// theory's earlier declarations first, then `env`; `by` facts resolve to
/// theorems only. Failures become error diagnostics.
CheckResult check_theory(const TheoryDoc& doc, const Environment& env);

// ---------------------------------------------------------------------------
// Planning

struct BuildPlan {
  Catalog catalog;
  std::vector<SessionName> selected_sessions;  // session topological order
  DepGraph<TheoryName> theory_graph;
  std::map<TheoryName, std::string> initial_versions;  // source digests
  std::map<TheoryName, Bytes> sources;
  std::map<TheoryName, std::uint64_t> declared_costs;  // 0 when the body does not parse

  const SessionName& owner(const TheoryName& theory) const;
};

inline std::string theory_file(const TheoryName& theory) { return theory + ".thy"; }

/// Fails with Error{empty} when nothing is selected, Error{reference} for
/// missing sources, unknown or unselected imports and unselected parent
/// sessions, Error{scope} for imports outside the session's ancestry,
/// CycleError for import cycles and SourceError for header syntax.
BuildPlan plan(const Catalog& catalog, const Selection& sel,
               const std::map<TheoryName, Bytes>& sources);

// ---------------------------------------------------------------------------
// Scheduling arithmetic

struct Schedule {
  std::uint64_t makespan = 0;
  std::map<TheoryName, std::uint64_t> start;
  std::map<TheoryName, std::uint64_t> finish;
  std::vector<TheoryName> order;  // dispatch order
};

/// Ready-queue order: larger cost first, then smaller name.
struct ReadyOrder {
  const std::map<TheoryName, std::uint64_t>* costs;
  bool operator()(const TheoryName& a, const TheoryName& b) const;
};

/// List-schedules `graph` on `workers` slots with the engine's ready-queue
/// order, in virtual time.
Schedule simulate_schedule(const DepGraph<TheoryName>& graph,
                           const std::map<TheoryName, std::uint64_t>& costs, unsigned workers);

struct MakespanBounds {
  std::uint64_t lower = 0;
  std::uint64_t upper = 0;
};

/// lower = max(critical path, ceil(total / workers)), upper = total.
MakespanBounds makespan_bounds(const DepGraph<TheoryName>& graph,
                               const std::map<TheoryName, std::uint64_t>& costs,
                               unsigned workers);

std::uint64_t critical_path(const DepGraph<TheoryName>& graph,
                            const std::map<TheoryName, std::uint64_t>& costs);

/// cpu / elapsed; Error{domain} unless elapsed > 0.
double factor(double elapsed, double cpu);
/// One decimal place, e.g. "30.3".
std::string format_factor(double f);

// ---------------------------------------------------------------------------
// Engine

struct EngineConfig {
  unsigned workers = 1;
  unsigned purge_watermark = 64;
  bool realtime = false;  // sleep for declared cost instead of only accounting it
};

struct NodeState {
  TheoryName node;
  std::uint64_t version = 1;
  NodeStatus status = NodeStatus::pending;
  Timing timing;
  std::vector<Diagnostic> diagnostics;
  std::optional<ExportPayload> exports;  // present iff finished_ok or committed
};

/// Receives each finished node's exports exactly once per version.
class CommitConsumer {
 public:
  virtual ~CommitConsumer() = default;
  virtual void commit(const SessionName& session, const TheoryName& theory,
                      const ExportPayload& payload) = 0;
  /// A previously committed version was invalidated.
  virtual void retract(const SessionName& /*session*/, const TheoryName& /*theory*/) {}
};

class StoreConsumer : public CommitConsumer {
 public:
  explicit StoreConsumer(std::shared_ptr<Store> store) : store_(std::move(store)) {}
  void commit(const SessionName& s, const TheoryName& t, const ExportPayload& p) override {
    store_->write(s, t, p);
  }
  void retract(const SessionName& s, const TheoryName& t) override { store_->remove(s, t); }

 private:
  std::shared_ptr<Store> store_;
};

class FunctionConsumer : public CommitConsumer {
 public:
  using Fn = std::function<void(const SessionName&, const TheoryName&, const ExportPayload&)>;
  explicit FunctionConsumer(Fn fn) : fn_(std::move(fn)) {}
  void commit(const SessionName& s, const TheoryName& t, const ExportPayload& p) override {
    fn_(s, t, p);
  }

 private:
  Fn fn_;
};

struct BuildSummary {
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::uint64_t elapsed_ms = 0;
  std::uint64_t cpu_ms = 0;
};

/// Engine events, delivered serially from the coordinating thread.
class EngineObserver {
 public:
  virtual ~EngineObserver() = default;
  virtual void on_status(const TheoryName&, NodeStatus, std::uint64_t /*version*/) {}
  virtual void on_committed(const TheoryName&, std::size_t /*triples*/) {}
  virtual void on_timing(const TheoryName&, const Timing&) {}
  virtual void on_build_finished(const BuildSummary&) {}
};

struct NodeReport {
  TheoryName theory;
  SessionName session;
  NodeStatus status;
  std::uint64_t version;
  Timing timing;
  std::vector<Diagnostic> diagnostics;
  bool ran = false;  // processed during this run
};

struct BuildReport {
  std::vector<NodeReport> nodes;  // theory topological order
  BuildSummary summary;           // nodes processed during this run
  std::vector<TheoryName> commit_order;
  std::vector<TheoryName> purged;
  std::size_t reloaded = 0;  // purged nodes re-derived from source
  std::size_t committed_total = 0;
  std::size_t resident = 0;
  std::uint64_t simulated_makespan_ms = 0;

  bool all_ok() const;
  double factor() const;
};

/// `log/build.json` document.
std::string build_log_json(const BuildReport& report, const BuildPlan& plan);

class Engine {
 public:
  Engine(BuildPlan plan, EngineConfig cfg, CommitConsumer* consumer,
         EngineObserver* observer = nullptr);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Processes every pending node; returns once the graph is quiescent.
  BuildReport run();

  /// Replaces a theory's source. Returns the invalidated nodes (the theory
  /// and its descendants), empty if the bytes are unchanged. Throws
  /// Error{reference} for unknown theories; import changes that would break
  /// the plan (cycle, scope, unknown import) are rejected with no effect.
  std::set<TheoryName> apply_edit(const TheoryName& theory, Bytes new_source);

  /// Evicts every purge-eligible node, in topological order.
  std::vector<TheoryName> purge();

  /// Thread-safe snapshot.
  std::vector<NodeState> states() const;
  std::optional<NodeState> state(const TheoryName& theory) const;
  std::size_t resident_count() const;

  const BuildPlan& plan() const { return plan_; }
  const EngineConfig& config() const { return cfg_; }

 private:
  struct Node;
  struct Job;
  struct Result;

  void transition(Node& node, NodeStatus to);
  bool purge_eligible(const TheoryName& theory) const;
  std::vector<TheoryName> evict(bool force);
  const EnvDelta& delta_for(const TheoryName& theory, std::map<TheoryName, EnvDelta>& reloaded);
  std::shared_ptr<const Environment> environment_for(const TheoryName& theory,
                                                     std::map<TheoryName, EnvDelta>& reloaded);
  BuildReport report(const std::set<TheoryName>& ran) const;

  BuildPlan plan_;
  EngineConfig cfg_;
  CommitConsumer* consumer_;
  EngineObserver* observer_;
  std::vector<TheoryName> topo_;
  std::map<TheoryName, std::unique_ptr<Node>> nodes_;
  mutable std::mutex mu_;  // guards node status/state for snapshot readers
  std::vector<TheoryName> purged_log_;
  std::vector<TheoryName> commit_log_;
  std::size_t reloaded_ = 0;
  std::size_t committed_total_ = 0;
};

/// One-shot build of `plan`.
BuildReport run_build(const BuildPlan& plan, const EngineConfig& cfg, CommitConsumer& on_commit,
                      EngineObserver* observer = nullptr);

}  // namespace forge
