#include "forge/model.hpp"

#include <numeric>

#include "forge/error.hpp"

namespace forge {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::range: return "range";
    case ErrorKind::lex: return "lex";
    case ErrorKind::encoding: return "encoding";
    case ErrorKind::syntax: return "syntax";
    case ErrorKind::semantic: return "semantic";
    case ErrorKind::reference: return "reference";
    case ErrorKind::cycle: return "cycle";
    case ErrorKind::scope: return "scope";
    case ErrorKind::domain: return "domain";
    case ErrorKind::storage: return "storage";
    case ErrorKind::empty: return "empty";
  }
  return "unknown";
}

std::string SourceError::format(const Position& pos, const std::string& message) {
  std::string out = pos.file.empty() ? std::string("<input>") : pos.file;
  out += ":" + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + message;
  return out;
}

std::string CycleError::format(const std::vector<std::string>& cycle) {
  std::string out = "cycle:";
  for (const auto& n : cycle) out += " " + n;
  return out;
}

LineColumn line_column_of(std::string_view contents, std::size_t offset) {
  if (offset > contents.size())
    throw Error(ErrorKind::range, "offset " + std::to_string(offset) + " beyond end of input (" +
                                      std::to_string(contents.size()) + " bytes)");
  LineColumn lc;
  for (std::size_t i = 0; i < offset; ++i) {
    if (contents[i] == '\n') {
      ++lc.line;
      lc.column = 1;
    } else {
      ++lc.column;
    }
  }
  return lc;
}

Position make_position(std::string_view file, std::string_view contents, std::size_t start,
                       std::size_t stop) {
  auto lc = line_column_of(contents, start);
  if (stop < start || stop > contents.size())
    throw Error(ErrorKind::range, "invalid range end " + std::to_string(stop));
  return Position{std::string(file), static_cast<std::uint32_t>(start),
                  static_cast<std::uint32_t>(stop), lc.line, lc.column};
}

std::string_view to_string(DeclKind kind) {
  switch (kind) {
    case DeclKind::constant: return "constant";
    case DeclKind::definition: return "definition";
    case DeclKind::theorem: return "theorem";
  }
  return "unknown";
}

DeclKind Command::decl_kind() const {
  switch (body.index()) {
    case 1: return DeclKind::constant;
    case 2: return DeclKind::definition;
    case 3: return DeclKind::theorem;
  }
  throw Error(ErrorKind::range, "section is not a declaration");
}

const std::string& Command::decl_name() const {
  if (auto* c = std::get_if<Const>(&body)) return c->name;
  if (auto* d = std::get_if<Definition>(&body)) return d->name;
  if (auto* t = std::get_if<Theorem>(&body)) return t->name;
  throw Error(ErrorKind::range, "section is not a declaration");
}

const Quoted& Command::payload() const {
  if (auto* c = std::get_if<Const>(&body)) return c->type_text;
  if (auto* d = std::get_if<Definition>(&body)) return d->body;
  if (auto* t = std::get_if<Theorem>(&body)) return t->statement;
  throw Error(ErrorKind::range, "section is not a declaration");
}

std::vector<TheoryName> TheoryDoc::import_names() const {
  std::vector<TheoryName> out;
  out.reserve(imports.size());
  for (const auto& i : imports) out.push_back(i.name);
  return out;
}

std::uint64_t TheoryDoc::declared_cost() const {
  std::uint64_t total = 0;
  for (const auto& c : commands)
    if (auto* t = std::get_if<Theorem>(&c.body)) total += t->cost;
  return total;
}

const SessionSpec* Catalog::find(std::string_view session) const {
  for (const auto& s : sessions)
    if (s.name == session) return &s;
  return nullptr;
}

const SessionSpec& Catalog::at(std::string_view session) const {
  if (auto* s = find(session)) return *s;
  throw Error(ErrorKind::reference, "unknown session " + std::string(session));
}

std::vector<SessionName> Catalog::ancestry(std::string_view session) const {
  std::vector<SessionName> chain;
  const SessionSpec* s = &at(session);
  while (s->parent) {
    chain.push_back(*s->parent);
    s = &at(*s->parent);
    if (chain.size() > sessions.size())
      throw Error(ErrorKind::cycle, "cyclic parent chain at " + std::string(session));
  }
  return chain;
}

std::string_view to_string(NodeStatus status) {
  switch (status) {
    case NodeStatus::pending: return "pending";
    case NodeStatus::running: return "running";
    case NodeStatus::finished_ok: return "finished_ok";
    case NodeStatus::finished_failed: return "finished_failed";
    case NodeStatus::committed: return "committed";
    case NodeStatus::purged: return "purged";
  }
  return "unknown";
}

std::optional<NodeStatus> status_from_string(std::string_view text) {
  for (auto s : kAllStatuses)
    if (to_string(s) == text) return s;
  return std::nullopt;
}

bool legal_transition(NodeStatus from, NodeStatus to) {
  using S = NodeStatus;
  if (to == S::pending) return true;
  switch (from) {
    case S::pending: return to == S::running;
    case S::running: return to == S::finished_ok || to == S::finished_failed;
    case S::finished_ok: return to == S::committed;
    case S::committed: return to == S::purged;
    case S::finished_failed:
    case S::purged: return false;
  }
  return false;
}

}  // namespace forge
