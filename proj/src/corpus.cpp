#include "forge/corpus.hpp"

#include <nlohmann/json.hpp>

#include "forge/engine.hpp"
#include "forge/error.hpp"
#include "forge/export.hpp"
#include "forge/syntax.hpp"

namespace forge {
namespace fs = std::filesystem;

Corpus load_corpus(const fs::path& dir) {
  Corpus c;
  c.dir = dir;
  auto root = dir / "ROOT";
  std::error_code ec;
  if (!fs::is_regular_file(root, ec))
    throw Error(ErrorKind::storage, "no ROOT catalog in " + dir.string());
  c.catalog = parse_catalog(read_file(root), "ROOT");
  for (const auto& [theory, _] : c.catalog.theory_owner) {
    auto path = dir / theory_file(theory);
    if (fs::is_regular_file(path, ec)) c.sources[theory] = read_file(path);
  }
  return c;
}

namespace {

void add(Counts& into, const Counts& from) {
  into.theories += from.theories;
  into.constants += from.constants;
  into.definitions += from.definitions;
  into.theorems += from.theorems;
  into.sections += from.sections;
  into.bytes += from.bytes;
  into.unparsed += from.unparsed;
}

nlohmann::ordered_json counts_json(const Counts& c) {
  nlohmann::ordered_json j;
  j["sessions"] = c.sessions;
  j["theories"] = c.theories;
  j["constants"] = c.constants;
  j["definitions"] = c.definitions;
  j["theorems"] = c.theorems;
  j["sections"] = c.sections;
  j["bytes"] = c.bytes;
  j["unparsed"] = c.unparsed;
  return j;
}

std::string csv_row(std::string_view scope, std::string_view name, const Counts& c) {
  std::string out(scope);
  out += ",";
  out += name;
  for (auto v : {c.sessions, c.theories, c.constants, c.definitions, c.theorems, c.sections,
                 c.bytes, c.unparsed})
    out += "," + std::to_string(v);
  return out + "\n";
}

}  // namespace

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  for (const auto& spec : corpus.catalog.sessions) {
    Counts sc;
    sc.sessions = 1;
    for (const auto& t : spec.theories) {
      ++sc.theories;
      auto it = corpus.sources.find(t);
      if (it == corpus.sources.end()) {
        ++sc.unparsed;
        continue;
      }
      sc.bytes += it->second.size();
      try {
        auto doc = parse_theory(it->second, theory_file(t));
        for (const auto& cmd : doc.commands) {
          switch (cmd.body.index()) {
            case 0: ++sc.sections; break;
            case 1: ++sc.constants; break;
            case 2: ++sc.definitions; break;
            case 3: ++sc.theorems; break;
          }
        }
      } catch (const Error&) {
        ++sc.unparsed;
      }
    }
    ++st.total.sessions;
    add(st.total, sc);
    for (const auto& g : spec.groups) {
      auto& gc = st.groups[g];
      ++gc.sessions;
      add(gc, sc);
    }
    st.sessions.emplace_back(spec.name, sc);
  }
  return st;
}

std::string stats_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["total"] = counts_json(stats.total);
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (const auto& [g, c] : stats.groups) groups[g] = counts_json(c);
  j["groups"] = std::move(groups);
  nlohmann::ordered_json sessions = nlohmann::ordered_json::object();
  for (const auto& [s, c] : stats.sessions) sessions[s] = counts_json(c);
  j["sessions"] = std::move(sessions);
  return j.dump(2) + "\n";
}

std::string stats_csv(const CorpusStats& stats) {
  std::string out =
      "scope,name,sessions,theories,constants,definitions,theorems,sections,bytes,unparsed\n";
  out += csv_row("corpus", "all", stats.total);
  for (const auto& [g, c] : stats.groups) out += csv_row("group", g, c);
  for (const auto& [s, c] : stats.sessions) out += csv_row("session", s, c);
  return out;
}

}  // namespace forge
