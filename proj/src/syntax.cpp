#include "forge/syntax.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <stdexcept>

#include "forge/depgraph.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"

namespace forge {
namespace {

constexpr std::array<std::string_view, 12> kKeywords = {
    "theory", "imports", "begin",   "end", "section", "const",
    "definition", "theorem", "by", "cost", "theories", "session"};

bool is_letter(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_name_char(unsigned char c) { return is_letter(c) || is_digit(c) || c == '_' || c == '\''; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
bool is_control(unsigned char c) { return (c < 0x20 && !is_space(c)) || c == 0x7f; }

// Length of the UTF-8 sequence starting at s[i], or 0 if it is malformed.
std::size_t utf8_length(std::string_view s, std::size_t i) {
  auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  unsigned char c = b(i);
  if (c < 0x80) return 1;
  std::size_t n = 0;
  std::uint32_t cp = 0;
  if ((c & 0xe0) == 0xc0) {
    n = 2;
    cp = c & 0x1f;
  } else if ((c & 0xf0) == 0xe0) {
    n = 3;
    cp = c & 0x0f;
  } else if ((c & 0xf8) == 0xf0) {
    n = 4;
    cp = c & 0x07;
  } else {
    return 0;
  }
  if (i + n > s.size()) return 0;
  for (std::size_t k = 1; k < n; ++k) {
    if ((b(i + k) & 0xc0) != 0x80) return 0;
    cp = (cp << 6) | (b(i + k) & 0x3f);
  }
  // Overlong forms, surrogates, beyond U+10FFFF.
  if ((n == 2 && cp < 0x80) || (n == 3 && cp < 0x800) || (n == 4 && cp < 0x10000)) return 0;
  if (cp >= 0xd800 && cp <= 0xdfff) return 0;
  if (cp > 0x10ffff) return 0;
  return n;
}

std::string describe(const std::optional<Token>& tok) {
  if (!tok) return "end of input";
  return std::string(to_string(tok->kind)) + " '" + tok->text + "'";
}

// One-token lookahead over a Lexer.
class TokenStream {
 public:
  TokenStream(std::string_view contents, std::string file) : lexer_(contents, std::move(file)) {}

  // The lookahead is lexed on demand so a header parse stops at 'begin'.
  const std::optional<Token>& peek() const {
    if (!filled_) {
      peeked_ = lexer_.next();
      filled_ = true;
    }
    return peeked_;
  }

  Token take() {
    Token t = std::move(*peek());
    last_stop_ = t.pos.stop;
    if (t.kind == TokenKind::keyword) keywords_.push_back(t.pos);
    filled_ = false;
    return t;
  }

  bool at_keyword(std::string_view kw) const {
    const auto& p = peek();
    return p && p->kind == TokenKind::keyword && p->text == kw;
  }
  bool at_delimiter(std::string_view d) const {
    const auto& p = peek();
    return p && p->kind == TokenKind::delimiter && p->text == d;
  }
  bool at(TokenKind kind) const { return peek() && peek()->kind == kind; }

  [[noreturn]] void unexpected(const std::string& expected) const {
    throw SourceError(ErrorKind::syntax, here(),
                      "expected " + expected + " but found " + describe(peek()));
  }

  Token expect_keyword(std::string_view kw) {
    if (!at_keyword(kw)) unexpected("'" + std::string(kw) + "'");
    return take();
  }
  Token expect_delimiter(std::string_view d) {
    if (!at_delimiter(d)) unexpected("'" + std::string(d) + "'");
    return take();
  }
  Token expect(TokenKind kind, const std::string& what) {
    if (!at(kind)) unexpected(what);
    return take();
  }

  Position here() const {
    if (peek()) return peek()->pos;
    auto end = lexer_.contents().size();
    return make_position(lexer_.file(), lexer_.contents(), end, end);
  }

  Position span_from(const Position& start) const {
    return make_position(lexer_.file(), lexer_.contents(), start.start, last_stop_);
  }

  const std::string& file() const { return lexer_.file(); }
  std::string_view contents() const { return lexer_.contents(); }
  std::vector<Position> take_keywords() { return std::move(keywords_); }

 private:
  mutable Lexer lexer_;
  std::vector<Position> keywords_;
  mutable std::optional<Token> peeked_;
  mutable bool filled_ = false;
  std::size_t last_stop_ = 0;
};

Quoted quoted_from(Token tok) {
  Quoted q;
  q.text = unquote(tok.text);
  q.raw = std::move(tok.text);
  q.pos = std::move(tok.pos);
  return q;
}

TheoryHeader read_header(TokenStream& ts) {
  TheoryHeader h;
  ts.expect_keyword("theory");
  auto name = ts.expect(TokenKind::identifier, "theory name");
  h.name = name.text;
  h.name_pos = name.pos;
  if (ts.at_keyword("imports")) {
    ts.take();
    if (!ts.at(TokenKind::identifier)) ts.unexpected("imported theory name");
    while (ts.at(TokenKind::identifier)) {
      auto tok = ts.take();
      if (tok.text == h.name)
        throw SourceError(ErrorKind::semantic, tok.pos, "theory " + h.name + " imports itself");
      bool dup = std::any_of(h.imports.begin(), h.imports.end(),
                             [&](const Import& i) { return i.name == tok.text; });
      if (dup) throw SourceError(ErrorKind::semantic, tok.pos, "duplicate import " + tok.text);
      h.imports.push_back(Import{tok.text, tok.pos});
    }
  }
  ts.expect_keyword("begin");
  return h;
}

std::uint64_t parse_nat(const Token& tok) {
  std::uint64_t v = 0;
  for (char c : tok.text) {
    auto d = static_cast<std::uint64_t>(c - '0');
    if (v > (UINT64_MAX - d) / 10)
      throw SourceError(ErrorKind::syntax, tok.pos, "number out of range: " + tok.text);
    v = v * 10 + d;
  }
  return v;
}

Command read_command(TokenStream& ts) {
  Command cmd;
  auto kw = ts.take();  // caller checked it is a command keyword
  const auto& k = kw.text;
  if (k == "section") {
    auto text = ts.expect(TokenKind::string, "section text");
    cmd.body = Section{unquote(text.text), text.pos};
  } else if (k == "const") {
    auto name = ts.expect(TokenKind::identifier, "constant name");
    cmd.name_pos = name.pos;
    ts.expect_delimiter("::");
    cmd.body = Const{name.text, quoted_from(ts.expect(TokenKind::string, "type string"))};
  } else if (k == "definition") {
    auto name = ts.expect(TokenKind::identifier, "definition name");
    cmd.name_pos = name.pos;
    ts.expect_delimiter("=");
    cmd.body = Definition{name.text, quoted_from(ts.expect(TokenKind::string, "definition body"))};
  } else {
    auto name = ts.expect(TokenKind::identifier, "theorem name");
    cmd.name_pos = name.pos;
    ts.expect_delimiter(":");
    Theorem thm;
    thm.name = name.text;
    thm.statement = quoted_from(ts.expect(TokenKind::string, "theorem statement"));
    if (ts.at_keyword("by")) {
      ts.take();
      ts.expect_delimiter("(");
      while (ts.at(TokenKind::identifier)) {
        auto f = ts.take();
        thm.facts.push_back(Fact{f.text, f.pos});
      }
      ts.expect_delimiter(")");
    }
    if (ts.at_keyword("cost")) {
      ts.take();
      thm.cost = parse_nat(ts.expect(TokenKind::natural, "cost in milliseconds"));
    }
    cmd.body = std::move(thm);
  }
  cmd.pos = ts.span_from(kw.pos);
  return cmd;
}

bool at_command(const TokenStream& ts) {
  return ts.at_keyword("section") || ts.at_keyword("const") || ts.at_keyword("definition") ||
         ts.at_keyword("theorem");
}

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::keyword: return "keyword";
    case TokenKind::identifier: return "identifier";
    case TokenKind::string: return "string";
    case TokenKind::natural: return "natural";
    case TokenKind::delimiter: return "delimiter";
  }
  return "token";
}

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::string unquote(std::string_view raw) {
  std::string out;
  if (raw.size() < 2) return out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 2 < raw.size()) ++i;
    out.push_back(raw[i]);
  }
  return out;
}

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// ---------------------------------------------------------------------------
// Lexer

Lexer::Lexer(std::string_view contents, std::string file)
    : contents_(contents), file_(std::move(file)) {}

void Lexer::fail(ErrorKind kind, std::size_t start, std::size_t stop,
                 const std::string& message) const {
  throw SourceError(kind, make_position(file_, contents_, start, stop), message);
}

void Lexer::skip_trivia() {
  while (offset_ < contents_.size()) {
    auto c = static_cast<unsigned char>(contents_[offset_]);
    if (is_space(c)) {
      ++offset_;
      continue;
    }
    if (c == '(' && offset_ + 1 < contents_.size() && contents_[offset_ + 1] == '*') {
      std::size_t open = offset_;
      std::size_t depth = 0;
      std::size_t i = offset_;
      while (true) {
        if (i >= contents_.size()) fail(ErrorKind::lex, open, open + 2, "unterminated comment");
        if (contents_[i] == '(' && i + 1 < contents_.size() && contents_[i + 1] == '*') {
          ++depth;
          i += 2;
        } else if (contents_[i] == '*' && i + 1 < contents_.size() && contents_[i + 1] == ')') {
          i += 2;
          if (--depth == 0) break;
        } else {
          auto n = utf8_length(contents_, i);
          if (n == 0) fail(ErrorKind::encoding, i, i + 1, "invalid UTF-8");
          i += n;
        }
      }
      offset_ = i;
      continue;
    }
    break;
  }
}

Token Lexer::lex_string() {
  std::size_t open = offset_;
  std::size_t i = offset_ + 1;
  while (true) {
    if (i >= contents_.size()) fail(ErrorKind::lex, open, open + 1, "unterminated string");
    auto c = static_cast<unsigned char>(contents_[i]);
    if (c == '"') {
      ++i;
      break;
    }
    if (c == '\\') {
      if (i + 1 >= contents_.size()) fail(ErrorKind::lex, open, open + 1, "unterminated string");
      char e = contents_[i + 1];
      if (e != '"' && e != '\\') fail(ErrorKind::lex, i, i + 2, "invalid escape in string");
      i += 2;
      continue;
    }
    if (is_control(c)) fail(ErrorKind::lex, i, i + 1, "control character in string");
    auto n = utf8_length(contents_, i);
    if (n == 0) fail(ErrorKind::encoding, i, i + 1, "invalid UTF-8");
    // U+FFFE and U+FFFF have no XML representation.
    if (n == 3 && contents_.substr(i, 2) == "\xef\xbf" &&
        (static_cast<unsigned char>(contents_[i + 2]) & 0xfe) == 0xbe)
      fail(ErrorKind::lex, i, i + 3, "noncharacter in string");
    i += n;
  }
  Token t{TokenKind::string, std::string(contents_.substr(open, i - open)),
          make_position(file_, contents_, open, i)};
  offset_ = i;
  return t;
}

std::optional<Token> Lexer::next() {
  skip_trivia();
  if (offset_ >= contents_.size()) return std::nullopt;
  std::size_t start = offset_;
  auto c = static_cast<unsigned char>(contents_[start]);
  auto emit = [&](TokenKind kind, std::size_t stop) {
    offset_ = stop;
    return Token{kind, std::string(contents_.substr(start, stop - start)),
                 make_position(file_, contents_, start, stop)};
  };
  if (c == '"') return lex_string();
  if (is_letter(c)) {
    std::size_t i = start + 1;
    while (i < contents_.size() && is_name_char(static_cast<unsigned char>(contents_[i]))) ++i;
    auto word = contents_.substr(start, i - start);
    return emit(is_keyword(word) ? TokenKind::keyword : TokenKind::identifier, i);
  }
  if (is_digit(c)) {
    std::size_t i = start + 1;
    while (i < contents_.size() && is_digit(static_cast<unsigned char>(contents_[i]))) ++i;
    return emit(TokenKind::natural, i);
  }
  if (c == ':') {
    bool dbl = start + 1 < contents_.size() && contents_[start + 1] == ':';
    return emit(TokenKind::delimiter, start + (dbl ? 2 : 1));
  }
  if (c == '=' || c == '(' || c == ')' || c == '+') return emit(TokenKind::delimiter, start + 1);
  if (c >= 0x80 && utf8_length(contents_, start) == 0)
    fail(ErrorKind::encoding, start, start + 1, "invalid UTF-8");
  auto n = c >= 0x80 ? utf8_length(contents_, start) : 1;
  fail(ErrorKind::lex, start, start + n, "unexpected character");
}

std::vector<Token> tokenize(std::string_view contents, std::string file) {
  Lexer lexer(contents, std::move(file));
  std::vector<Token> out;
  while (auto t = lexer.next()) out.push_back(std::move(*t));
  return out;
}

// ---------------------------------------------------------------------------
// Theories

TheoryHeader parse_theory_header(std::string_view contents, std::string file) {
  TokenStream ts(contents, std::move(file));
  return read_header(ts);
}

TheoryDoc parse_theory(std::string_view contents, std::string file) {
  TokenStream ts(contents, file);
  auto header = read_header(ts);
  TheoryDoc doc;
  doc.name = std::move(header.name);
  doc.name_pos = std::move(header.name_pos);
  doc.imports = std::move(header.imports);
  doc.file = std::move(file);
  std::set<std::string> declared;
  while (at_command(ts)) {
    auto cmd = read_command(ts);
    if (cmd.is_declaration() && !declared.insert(cmd.decl_name()).second)
      throw SourceError(ErrorKind::semantic, cmd.name_pos,
                        "duplicate declaration " + cmd.decl_name());
    doc.commands.push_back(std::move(cmd));
  }
  ts.expect_keyword("end");
  if (ts.peek()) ts.unexpected("end of input");
  doc.keywords = ts.take_keywords();
  doc.source_hash = digest(contents);
  doc.source_size = static_cast<std::uint32_t>(contents.size());
  return doc;
}

std::string print_theory(const TheoryDoc& doc) {
  std::string out = "theory " + doc.name;
  if (!doc.imports.empty()) {
    out += " imports";
    for (const auto& i : doc.imports) out += " " + i.name;
  }
  out += " begin\n";
  for (const auto& cmd : doc.commands) {
    std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, Section>) {
            out += "section " + quote(c.text);
          } else if constexpr (std::is_same_v<T, Const>) {
            out += "const " + c.name + " :: " + quote(c.type_text.text);
          } else if constexpr (std::is_same_v<T, Definition>) {
            out += "definition " + c.name + " = " + quote(c.body.text);
          } else {
            out += "theorem " + c.name + " : " + quote(c.statement.text);
            if (!c.facts.empty()) {
              out += " by (";
              for (std::size_t i = 0; i < c.facts.size(); ++i)
                out += (i ? " " : "") + c.facts[i].name;
              out += ")";
            }
            if (c.cost) out += " cost " + std::to_string(c.cost);
          }
        },
        cmd.body);
    out += "\n";
  }
  out += "end\n";
  return out;
}

bool same_structure(const TheoryDoc& a, const TheoryDoc& b) {
  if (a.name != b.name || a.import_names() != b.import_names() ||
      a.commands.size() != b.commands.size())
    return false;
  for (std::size_t i = 0; i < a.commands.size(); ++i) {
    const auto& x = a.commands[i].body;
    const auto& y = b.commands[i].body;
    if (x.index() != y.index()) return false;
    if (auto* s = std::get_if<Section>(&x)) {
      if (s->text != std::get<Section>(y).text) return false;
      continue;
    }
    const auto& cx = a.commands[i];
    const auto& cy = b.commands[i];
    if (cx.decl_name() != cy.decl_name() || cx.payload().text != cy.payload().text) return false;
    if (auto* t = std::get_if<Theorem>(&x)) {
      const auto& u = std::get<Theorem>(y);
      if (t->cost != u.cost || t->facts.size() != u.facts.size()) return false;
      for (std::size_t k = 0; k < t->facts.size(); ++k)
        if (t->facts[k].name != u.facts[k].name) return false;
    }
  }
  return true;
}

std::vector<Occurrence> identifier_occurrences(const Command& cmd) {
  if (!cmd.is_declaration())
    throw std::invalid_argument("identifier_occurrences: section has no payload");
  const Quoted& q = cmd.payload();
  std::vector<Occurrence> out;
  const std::string& raw = q.raw;
  std::uint32_t line = q.pos.line;
  std::uint32_t column = q.pos.column;
  // Skip the opening quote; the closing quote is never a name character.
  std::size_t i = 1;
  ++column;
  auto advance = [&](std::size_t k) {
    for (std::size_t j = 0; j < k && i < raw.size(); ++j, ++i) {
      if (raw[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
  };
  while (i + 1 < raw.size()) {
    auto c = static_cast<unsigned char>(raw[i]);
    if (c == '\\') {
      advance(2);
      continue;
    }
    if (!is_name_char(c)) {
      advance(1);
      continue;
    }
    std::size_t start = i;
    std::uint32_t l = line, col = column;
    std::size_t stop = i;
    while (stop + 1 < raw.size() && is_name_char(static_cast<unsigned char>(raw[stop]))) ++stop;
    if (is_letter(c)) {
      Position p{q.pos.file, q.pos.start + static_cast<std::uint32_t>(start),
                 q.pos.start + static_cast<std::uint32_t>(stop), l, col};
      out.push_back(Occurrence{raw.substr(start, stop - start), std::move(p)});
    }
    advance(stop - start);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Catalog

Catalog parse_catalog(std::string_view contents, std::string file) {
  TokenStream ts(contents, file);
  Catalog cat;
  struct ParentRef {
    std::string name;
    Position pos;
  };
  std::vector<std::optional<ParentRef>> parent_refs;
  std::vector<std::vector<Token>> theory_tokens;

  while (ts.peek()) {
    auto kw = ts.expect_keyword("session");
    SessionSpec spec;
    auto name = ts.expect(TokenKind::identifier, "session name");
    spec.name = name.text;
    spec.pos = name.pos;
    if (cat.find(spec.name))
      throw SourceError(ErrorKind::semantic, name.pos, "duplicate session " + spec.name);
    if (ts.at_delimiter("(")) {
      ts.take();
      while (ts.at(TokenKind::identifier)) spec.groups.insert(ts.take().text);
      ts.expect_delimiter(")");
    }
    std::optional<ParentRef> parent;
    if (ts.at_delimiter("=")) {
      ts.take();
      auto p = ts.expect(TokenKind::identifier, "parent session name");
      ts.expect_delimiter("+");
      spec.parent = p.text;
      parent = ParentRef{p.text, p.pos};
    }
    ts.expect_keyword("theories");
    if (!ts.at(TokenKind::identifier)) ts.unexpected("theory name");
    std::vector<Token> toks;
    while (ts.at(TokenKind::identifier)) {
      auto t = ts.take();
      if (std::find(spec.theories.begin(), spec.theories.end(), t.text) != spec.theories.end())
        throw SourceError(ErrorKind::semantic, t.pos,
                          "theory " + t.text + " listed twice in session " + spec.name);
      spec.theories.push_back(t.text);
      toks.push_back(std::move(t));
    }
    cat.sessions.push_back(std::move(spec));
    parent_refs.push_back(std::move(parent));
    theory_tokens.push_back(std::move(toks));
  }

  for (std::size_t s = 0; s < cat.sessions.size(); ++s) {
    const auto& spec = cat.sessions[s];
    for (const auto& tok : theory_tokens[s]) {
      auto [it, fresh] = cat.theory_owner.emplace(tok.text, spec.name);
      if (!fresh)
        throw SourceError(ErrorKind::semantic, tok.pos,
                          "theory " + tok.text + " claimed by sessions " + it->second + " and " +
                              spec.name);
    }
    if (const auto& p = parent_refs[s]; p && !cat.find(p->name))
      throw SourceError(ErrorKind::semantic, p->pos,
                        "unknown parent session " + p->name + " of " + spec.name);
  }

  std::set<std::string> names;
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& spec : cat.sessions) {
    names.insert(spec.name);
    if (spec.parent) edges.emplace_back(*spec.parent, spec.name);
  }
  // Throws CycleError with a witness.
  (void)DepGraph<std::string>::build(names, edges);
  return cat;
}

}  // namespace forge
