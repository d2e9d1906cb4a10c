#pragma once

// Lexer and parsers for `.thy` theory sources and `ROOT` session catalogs.
//
// Theory grammar:
//
//   theory   ::= "theory" NAME [ "imports" NAME+ ] "begin" command* "end"
//   command  ::= "section" STRING
//              | "const" NAME "::" STRING
//              | "definition" NAME "=" STRING
//              | "theorem" NAME ":" STRING [ "by" "(" NAME* ")" ] [ "cost" NAT ]
//
// Catalog grammar:
//
//   catalog  ::= session*
//   session  ::= "session" NAME [ "(" NAME* ")" ] [ "=" NAME "+" ] "theories" NAME+
//
// Comments are `(* ... *)` and nest. All parse failures are reported as
// SourceError with the position of the offending token.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/error.hpp"
#include "forge/model.hpp"

namespace forge {

enum class TokenKind { keyword, identifier, string, natural, delimiter };

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;  // raw source slice; strings keep their quotes and escapes
  Position pos;
};

/// True iff `word` is one of the reserved keywords.
bool is_keyword(std::string_view word);

/// Decodes the body of a string token (quotes included in `raw`).
std::string unquote(std::string_view raw);

/// Inverse of unquote for canonical printing.
std::string quote(std::string_view text);

/// Pull-style lexer; lexes lazily so a header can be read without touching
/// the rest of the file.
class Lexer {
 public:
  Lexer(std::string_view contents, std::string file);

  /// Next token or nullopt at end of input. Throws SourceError.
  std::optional<Token> next();

  std::size_t offset() const { return offset_; }
  std::string_view contents() const { return contents_; }
  const std::string& file() const { return file_; }

 private:
  void skip_trivia();
  Token lex_string();
  [[noreturn]] void fail(ErrorKind kind, std::size_t start, std::size_t stop,
                         const std::string& message) const;

  std::string_view contents_;
  std::string file_;
  std::size_t offset_ = 0;
};

std::vector<Token> tokenize(std::string_view contents, std::string file = {});

struct TheoryHeader {
  TheoryName name;
  Position name_pos;
  std::vector<Import> imports;
};

/// Parses `theory NAME [imports ...] begin` and stops.
TheoryHeader parse_theory_header(std::string_view contents, std::string file = {});

TheoryDoc parse_theory(std::string_view contents, std::string file = {});

Catalog parse_catalog(std::string_view contents, std::string file = "ROOT");

/// Canonical source text for `doc`; parse_theory(print_theory(doc)) is
/// structurally equal to `doc`.
std::string print_theory(const TheoryDoc& doc);

/// Structural equality ignoring positions, file names and hashes.
bool same_structure(const TheoryDoc& a, const TheoryDoc& b);

struct Occurrence {
  std::string name;
  Position pos;
};

/// Maximal runs of [A-Za-z0-9_'] inside the quoted payload that start with a
/// letter, positioned in the original file. Throws std::invalid_argument for
/// sections.
std::vector<Occurrence> identifier_occurrences(const Command& cmd);

}  // namespace forge
