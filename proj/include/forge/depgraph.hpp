#pragma once

// Acyclic dependency graph over opaque, totally ordered node ids.
//
// An edge (from, to) means "to depends on from". Construction rejects
// dangling endpoints (Error{reference}) and cycles (CycleError with one
// witness cycle). After construction the graph is immutable and every query
// is safe to call concurrently.

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "forge/error.hpp"
#include "forge/model.hpp"

namespace forge {

namespace detail {
inline std::string node_label(const std::string& id) { return id; }
template <class Id>
  requires std::is_arithmetic_v<Id>
std::string node_label(Id id) {
  return std::to_string(id);
}
}  // namespace detail

template <class Id>
class DepGraph {
 public:
  using Edge = std::pair<Id, Id>;

  DepGraph() = default;

  template <class NodeRange, class EdgeRange>
  static DepGraph build(const NodeRange& nodes, const EdgeRange& edges) {
    DepGraph g;
    for (const auto& n : nodes) {
      g.succ_[n];
      g.pred_[n];
    }
    for (const auto& [from, to] : edges) {
      if (!g.succ_.count(from))
        throw Error(ErrorKind::reference, "edge endpoint " + detail::node_label(from) +
                                              " is not a node");
      if (!g.succ_.count(to))
        throw Error(ErrorKind::reference, "edge endpoint " + detail::node_label(to) +
                                              " is not a node");
      g.succ_[from].insert(to);
      g.pred_[to].insert(from);
    }
    g.check_acyclic();
    return g;
  }

  std::vector<Id> nodes() const {
    std::vector<Id> out;
    out.reserve(succ_.size());
    for (const auto& [n, _] : succ_) out.push_back(n);
    return out;
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (const auto& [n, next] : succ_)
      for (const auto& m : next) out.emplace_back(n, m);
    return out;
  }

  std::size_t size() const { return succ_.size(); }
  std::size_t edge_count() const {
    std::size_t k = 0;
    for (const auto& [_, next] : succ_) k += next.size();
    return k;
  }
  bool contains(const Id& n) const { return succ_.count(n) != 0; }

  const std::set<Id>& successors(const Id& n) const { return lookup(succ_, n); }
  const std::set<Id>& predecessors(const Id& n) const { return lookup(pred_, n); }

  /// Lexicographically least topological order.
  std::vector<Id> topo_order() const {
    std::map<Id, std::size_t> indegree;
    std::set<Id> ready;
    for (const auto& [n, preds] : pred_) {
      indegree[n] = preds.size();
      if (preds.empty()) ready.insert(n);
    }
    std::vector<Id> out;
    out.reserve(succ_.size());
    while (!ready.empty()) {
      Id n = *ready.begin();
      ready.erase(ready.begin());
      out.push_back(n);
      for (const auto& m : succ_.at(n))
        if (--indegree[m] == 0) ready.insert(m);
    }
    return out;
  }

  std::set<Id> descendants(const Id& n) const { return reach(succ_, n); }
  std::set<Id> ancestors(const Id& n) const { return reach(pred_, n); }

  /// Induced subgraph on `keep` (ids not in the graph are ignored).
  DepGraph restrict(const std::set<Id>& keep) const {
    DepGraph g;
    for (const auto& n : keep) {
      if (!contains(n)) continue;
      g.succ_[n];
      g.pred_[n];
    }
    for (const auto& [n, next] : succ_) {
      if (!g.contains(n)) continue;
      for (const auto& m : next)
        if (g.contains(m)) {
          g.succ_[n].insert(m);
          g.pred_[m].insert(n);
        }
    }
    return g;
  }

 private:
  using Adjacency = std::map<Id, std::set<Id>>;

  static const std::set<Id>& lookup(const Adjacency& adj, const Id& n) {
    auto it = adj.find(n);
    if (it == adj.end())
      throw Error(ErrorKind::reference, "unknown node " + detail::node_label(n));
    return it->second;
  }

  static std::set<Id> reach(const Adjacency& adj, const Id& n) {
    std::set<Id> seen;
    std::deque<Id> work(lookup(adj, n).begin(), lookup(adj, n).end());
    while (!work.empty()) {
      Id m = work.front();
      work.pop_front();
      if (!seen.insert(m).second) continue;
      for (const auto& k : adj.at(m))
        if (!seen.count(k)) work.push_back(k);
    }
    return seen;
  }

  // Iterative DFS; on a back edge u→v, reports v … u v.
  void check_acyclic() const {
    enum class Color { white, gray, black };
    std::map<Id, Color> color;
    for (const auto& [n, _] : succ_) color[n] = Color::white;
    for (const auto& [root, _] : succ_) {
      if (color[root] != Color::white) continue;
      using Frame = std::pair<Id, typename std::set<Id>::const_iterator>;
      std::vector<Frame> stack;
      stack.emplace_back(root, succ_.at(root).begin());
      color[root] = Color::gray;
      while (!stack.empty()) {
        auto& [u, it] = stack.back();
        if (it == succ_.at(u).end()) {
          color[u] = Color::black;
          stack.pop_back();
          continue;
        }
        Id v = *it++;
        if (color[v] == Color::gray) {
          std::vector<std::string> cycle;
          auto start = std::find_if(stack.begin(), stack.end(),
                                    [&](const Frame& f) { return f.first == v; });
          for (auto f = start; f != stack.end(); ++f) cycle.push_back(detail::node_label(f->first));
          cycle.push_back(detail::node_label(v));
          throw CycleError(std::move(cycle));
        }
        if (color[v] == Color::white) {
          color[v] = Color::gray;
          stack.emplace_back(v, succ_.at(v).begin());
        }
      }
    }
  }

  Adjacency succ_;
  Adjacency pred_;
};

// ---------------------------------------------------------------------------
// Session selection

struct Selection {
  std::set<std::string> include_groups;
  std::set<std::string> exclude_groups;
  std::vector<SessionName> sessions;
  bool all = false;
  bool requirements = false;  // close under ancestor sessions
};

/// Parent → child edges over all catalog sessions.
DepGraph<SessionName> session_graph(const Catalog& catalog);

/// Explicit ∪ included-group ∪ (all ? everything : ∅), minus excluded groups,
/// then (if requirements) plus every ancestor of the survivors regardless of
/// groups. Unknown explicit sessions raise Error{reference}.
std::set<SessionName> select(const Catalog& catalog, const DepGraph<SessionName>& sessions,
                             const Selection& sel);

}  // namespace forge
