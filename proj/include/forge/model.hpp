#pragma once

// Domain types shared by the parser, graph, engine, exporters and server.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace forge {

using Bytes = std::string;  // raw file contents; not assumed to be valid UTF-8
using TheoryName = std::string;
using SessionName = std::string;

/// A byte range [start, stop) inside one file, plus the 1-based line/column
/// of `start` for display.
struct Position {
  std::string file;
  std::uint32_t start = 0;
  std::uint32_t stop = 0;
  std::uint32_t line = 1;
  std::uint32_t column = 1;

  bool operator==(const Position&) const = default;
};

struct LineColumn {
  std::uint32_t line = 1;
  std::uint32_t column = 1;
  bool operator==(const LineColumn&) const = default;
};

/// 1-based line and byte column of `offset`; LF terminates lines.
/// Throws Error(range) when offset > contents.size().
LineColumn line_column_of(std::string_view contents, std::size_t offset);

/// Builds a Position for [start, stop) in `contents` with line/column filled.
Position make_position(std::string_view file, std::string_view contents,
                       std::size_t start, std::size_t stop);

// ---------------------------------------------------------------------------
// Theories

struct Section {
  std::string text;
  Position text_pos;
};

/// Quoted payload: decoded text plus the range of the whole string token
/// (including quotes) in the source.
struct Quoted {
  std::string text;
  std::string raw;  // token text as written, quotes and escapes included
  Position pos;
};

struct Const {
  std::string name;
  Quoted type_text;
};

struct Definition {
  std::string name;
  Quoted body;
};

struct Fact {
  std::string name;
  Position pos;
};

struct Theorem {
  std::string name;
  Quoted statement;
  std::vector<Fact> facts;
  std::uint64_t cost = 0;  // milliseconds
};

enum class DeclKind { constant, definition, theorem };

std::string_view to_string(DeclKind kind);

struct Command {
  std::variant<Section, Const, Definition, Theorem> body;
  Position pos;       // whole command, keyword to last token
  Position name_pos;  // declaration name; unused for sections

  bool is_declaration() const { return body.index() != 0; }
  DeclKind decl_kind() const;             // precondition: is_declaration()
  const std::string& decl_name() const;   // precondition: is_declaration()
  const Quoted& payload() const;          // precondition: is_declaration()
};

struct Import {
  TheoryName name;
  Position pos;
};

struct TheoryDoc {
  TheoryName name;
  std::string file;
  Position name_pos;
  std::vector<Import> imports;
  std::vector<Command> commands;
  std::vector<Position> keywords;  // every keyword token, in source order
  std::string source_hash;
  std::uint32_t source_size = 0;

  std::vector<TheoryName> import_names() const;
  /// Sum of declared theorem costs.
  std::uint64_t declared_cost() const;
};

// ---------------------------------------------------------------------------
// Sessions

struct SessionSpec {
  SessionName name;
  std::set<std::string> groups;
  std::optional<SessionName> parent;
  std::vector<TheoryName> theories;
  Position pos;
};

struct Catalog {
  std::vector<SessionSpec> sessions;  // declaration order
  std::map<TheoryName, SessionName> theory_owner;

  const SessionSpec* find(std::string_view session) const;
  const SessionSpec& at(std::string_view session) const;  // throws reference
  /// Parent chain of `session`, nearest first, excluding `session` itself.
  std::vector<SessionName> ancestry(std::string_view session) const;
};

// ---------------------------------------------------------------------------
// Build lifecycle

enum class NodeStatus { pending, running, finished_ok, finished_failed, committed, purged };

inline constexpr NodeStatus kAllStatuses[] = {
    NodeStatus::pending,         NodeStatus::running,   NodeStatus::finished_ok,
    NodeStatus::finished_failed, NodeStatus::committed, NodeStatus::purged};

std::string_view to_string(NodeStatus status);
std::optional<NodeStatus> status_from_string(std::string_view text);

/// Pending→Running→Finished-{ok,failed}; Finished-ok→Committed→Purged;
/// any state→Pending (invalidation).
bool legal_transition(NodeStatus from, NodeStatus to);

enum class Severity { error, warning };

struct Diagnostic {
  Position pos;
  Severity severity = Severity::error;
  std::string message;
};

struct Timing {
  std::uint64_t elapsed_ms = 0;
  std::uint64_t cpu_ms = 0;
  std::uint64_t scheduled_at_ms = 0;  // relative to build start
  std::uint64_t finished_at_ms = 0;
};

}  // namespace forge
