#include "forge/depgraph.hpp"

namespace forge {

DepGraph<SessionName> session_graph(const Catalog& catalog) {
  std::set<SessionName> nodes;
  std::vector<std::pair<SessionName, SessionName>> edges;
  for (const auto& s : catalog.sessions) {
    nodes.insert(s.name);
    if (s.parent) edges.emplace_back(*s.parent, s.name);
  }
  return DepGraph<SessionName>::build(nodes, edges);
}

std::set<SessionName> select(const Catalog& catalog, const DepGraph<SessionName>& sessions,
                             const Selection& sel) {
  std::set<SessionName> chosen;
  for (const auto& name : sel.sessions) {
    if (!catalog.find(name)) throw Error(ErrorKind::reference, "unknown session " + name);
    chosen.insert(name);
  }
  auto in_any = [](const SessionSpec& s, const std::set<std::string>& groups) {
    for (const auto& g : s.groups)
      if (groups.count(g)) return true;
    return false;
  };
  for (const auto& s : catalog.sessions)
    if (sel.all || in_any(s, sel.include_groups)) chosen.insert(s.name);
  std::erase_if(chosen, [&](const SessionName& n) {
    return in_any(catalog.at(n), sel.exclude_groups);
  });
  if (sel.requirements) {
    std::set<SessionName> closed = chosen;
    for (const auto& n : chosen) closed.merge(sessions.ancestors(n));
    return closed;
  }
  return chosen;
}

}  // namespace forge
