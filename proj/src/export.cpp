#include "forge/export.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "forge/error.hpp"

namespace forge {
namespace fs = std::filesystem;

std::string_view to_string(MarkupKind kind) {
  switch (kind) {
    case MarkupKind::keyword: return "keyword";
    case MarkupKind::string: return "string";
    case MarkupKind::entity_def: return "entity_def";
    case MarkupKind::entity_ref: return "entity_ref";
    case MarkupKind::error: return "error";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Markup

namespace {

MarkupNode leaf(const Position& p, MarkupKind kind,
                std::vector<std::pair<std::string, std::string>> props = {}) {
  return MarkupNode{p, kind, std::move(props), {}};
}

MarkupNode occurrence_node(const ResolvedOccurrence& occ) {
  if (!occ.target) {
    std::string what = occ.is_fact ? "unknown fact " : "unresolved identifier ";
    return leaf(occ.pos, MarkupKind::error, {{"message", what + occ.name}});
  }
  const auto& t = *occ.target;
  return leaf(occ.pos, MarkupKind::entity_ref,
              {{"target", t.long_name},
               {"kind", std::string(to_string(t.kind))},
               {"target_file", t.pos.file},
               {"target_start", std::to_string(t.pos.start)},
               {"target_stop", std::to_string(t.pos.stop)}});
}

std::optional<std::string> check_level(const std::vector<MarkupNode>& nodes, std::size_t lo,
                                       std::size_t hi, bool strict) {
  std::size_t cursor = lo;
  for (const auto& n : nodes) {
    if (n.range.start > n.range.stop) return "inverted range at " + std::to_string(n.range.start);
    if (n.range.start < cursor || n.range.stop > hi)
      return "range [" + std::to_string(n.range.start) + "," + std::to_string(n.range.stop) +
             ") escapes its parent or overlaps a sibling";
    if (strict && n.range.start == lo && n.range.stop == hi)
      return "child range equals parent range at " + std::to_string(lo);
    if (auto v = check_level(n.children, n.range.start, n.range.stop, true)) return v;
    cursor = n.range.stop;
  }
  return std::nullopt;
}

nlohmann::ordered_json node_json(const MarkupNode& n) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(n.kind);
  j["start"] = n.range.start;
  j["stop"] = n.range.stop;
  j["line"] = n.range.line;
  j["column"] = n.range.column;
  if (!n.properties.empty()) {
    nlohmann::ordered_json props = nlohmann::ordered_json::object();
    for (const auto& [k, v] : n.properties) props[k] = v;
    j["properties"] = std::move(props);
  }
  if (!n.children.empty()) {
    auto kids = nlohmann::ordered_json::array();
    for (const auto& c : n.children) kids.push_back(node_json(c));
    j["children"] = std::move(kids);
  }
  return j;
}

}  // namespace

MarkupTree markup_of(const TheoryDoc& doc, const Resolution& resolution) {
  std::map<std::size_t, std::vector<const ResolvedOccurrence*>> payload_occ;
  std::vector<MarkupNode> nodes;
  for (const auto& occ : resolution) {
    if (occ.is_fact)
      nodes.push_back(occurrence_node(occ));
    else
      payload_occ[occ.command].push_back(&occ);
  }
  for (const auto& k : doc.keywords) nodes.push_back(leaf(k, MarkupKind::keyword));
  for (std::size_t i = 0; i < doc.commands.size(); ++i) {
    const auto& cmd = doc.commands[i];
    if (auto* s = std::get_if<Section>(&cmd.body)) {
      nodes.push_back(leaf(s->text_pos, MarkupKind::string));
      continue;
    }
    nodes.push_back(leaf(cmd.name_pos, MarkupKind::entity_def,
                         {{"name", doc.name + "." + cmd.decl_name()},
                          {"kind", std::string(to_string(cmd.decl_kind()))}}));
    MarkupNode str = leaf(cmd.payload().pos, MarkupKind::string);
    for (const auto* occ : payload_occ[i]) str.children.push_back(occurrence_node(*occ));
    std::sort(str.children.begin(), str.children.end(),
              [](const MarkupNode& a, const MarkupNode& b) { return a.range.start < b.range.start; });
    nodes.push_back(std::move(str));
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const MarkupNode& a, const MarkupNode& b) { return a.range.start < b.range.start; });
  return MarkupTree{std::move(nodes)};
}

std::optional<std::string> markup_violation(const MarkupTree& tree, std::size_t file_size) {
  return check_level(tree.roots, 0, file_size, false);
}

std::string markup_json(const TheoryDoc& doc, const MarkupTree& tree) {
  nlohmann::ordered_json j;
  j["theory"] = doc.name;
  j["file"] = doc.file;
  j["source_hash"] = doc.source_hash;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& n : tree.roots) arr.push_back(node_json(n));
  j["markup"] = std::move(arr);
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// RDF

std::string theory_iri(std::string_view theory) {
  return "corpus:/theory/" + std::string(theory);
}

std::string declaration_iri(std::string_view theory, std::string_view name) {
  return theory_iri(theory) + "#" + std::string(name);
}

std::string ulo(std::string_view local) { return std::string(kUloNamespace) + std::string(local); }

std::string Term::ntriples() const {
  switch (kind) {
    case Kind::iri: return "<" + value + ">";
    case Kind::integer: return "\"" + value + "\"^^<" + std::string(kXsdInteger) + ">";
    case Kind::string: break;
  }
  std::string out = "\"";
  for (char c : value) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

std::string Triple::ntriples() const {
  return subject.ntriples() + " " + predicate.ntriples() + " " + object.ntriples() + " .";
}

std::vector<Triple> rdf_of(const TheoryDoc& doc, const Resolution& resolution) {
  std::vector<Triple> out;
  const auto th = Term::iri(theory_iri(doc.name));
  out.push_back({th, Term::iri(ulo("type")), Term::iri(ulo("theory"))});
  for (const auto& imp : doc.imports)
    out.push_back({th, Term::iri(ulo("imports")), Term::iri(theory_iri(imp.name))});

  std::map<std::size_t, std::set<std::string>> uses;
  for (const auto& occ : resolution)
    if (occ.target) uses[occ.command].insert(occ.target->long_name);

  for (std::size_t i = 0; i < doc.commands.size(); ++i) {
    const auto& cmd = doc.commands[i];
    if (!cmd.is_declaration()) continue;
    auto decl = Term::iri(declaration_iri(doc.name, cmd.decl_name()));
    out.push_back({th, Term::iri(ulo("declares")), decl});
    out.push_back({decl, Term::iri(ulo("type")), Term::iri(ulo(to_string(cmd.decl_kind())))});
    out.push_back({decl, Term::iri(ulo("sourceref")),
                   Term::literal(doc.file + ":" + std::to_string(cmd.pos.start) + ":" +
                                 std::to_string(cmd.pos.stop))});
    for (const auto& target : uses[i]) {
      auto dot = target.find('.');
      out.push_back({decl, Term::iri(ulo("uses")),
                     Term::iri(declaration_iri(target.substr(0, dot), target.substr(dot + 1)))});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string to_ntriples(const std::vector<Triple>& triples) {
  std::string out;
  for (const auto& t : triples) out += t.ntriples() + "\n";
  return out;
}

namespace {

class NTriplesReader {
 public:
  NTriplesReader(std::string_view line, std::size_t lineno) : s_(line), lineno_(lineno) {}

  Triple triple() {
    Triple t;
    t.subject = iri();
    t.predicate = iri();
    skip_ws();
    t.object = peek() == '"' ? literal() : iri();
    skip_ws();
    expect('.');
    skip_ws();
    if (i_ != s_.size() && s_[i_] != '#') fail("trailing characters");
    return t;
  }

 private:
  char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }
  void skip_ws() {
    while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::syntax, "N-Triples line " + std::to_string(lineno_) + ", column " +
                                       std::to_string(i_ + 1) + ": " + what);
  }

  std::string iri_body() {
    expect('<');
    std::string v;
    while (peek() != '>') {
      char c = peek();
      if (c == '\0') fail("unterminated IRI");
      if (c == ' ' || c == '"' || c == '{' || c == '}' || c == '|' || c == '^' || c == '`' ||
          c == '\\' || c == '<' || static_cast<unsigned char>(c) <= 0x20)
        fail("character not allowed in IRI");
      v.push_back(c);
      ++i_;
    }
    ++i_;
    if (v.find(':') == std::string::npos) fail("relative IRI");
    return v;
  }

  Term iri() {
    skip_ws();
    return Term::iri(iri_body());
  }

  Term literal() {
    expect('"');
    std::string v;
    while (true) {
      char c = peek();
      if (c == '\0' && i_ >= s_.size()) fail("unterminated literal");
      ++i_;
      if (c == '"') break;
      if (c == '\n' || c == '\r') fail("raw line break in literal");
      if (c != '\\') {
        v.push_back(c);
        continue;
      }
      char e = peek();
      ++i_;
      switch (e) {
        case '"': v.push_back('"'); break;
        case '\\': v.push_back('\\'); break;
        case 'n': v.push_back('\n'); break;
        case 'r': v.push_back('\r'); break;
        case 't': v.push_back('\t'); break;
        default: fail("unsupported escape");
      }
    }
    if (peek() == '@') fail("language tags are not used in this corpus");
    if (peek() == '^') {
      expect('^');
      expect('^');
      auto dt = iri_body();
      if (dt != kXsdInteger) fail("unsupported datatype " + dt);
      if (v.empty()) fail("empty integer");
      std::size_t k = (v[0] == '-' || v[0] == '+') ? 1 : 0;
      if (k == v.size() || !std::all_of(v.begin() + k, v.end(), ::isdigit))
        fail("malformed integer");
      return Term{Term::Kind::integer, v};
    }
    return Term::literal(std::move(v));
  }

  std::string_view s_;
  std::size_t lineno_;
  std::size_t i_ = 0;
};

}  // namespace

std::vector<Triple> parse_ntriples(std::string_view text) {
  std::vector<Triple> out;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line[first] == '#') continue;
    out.push_back(NTriplesReader(line, lineno).triple());
  }
  return out;
}

// ---------------------------------------------------------------------------
// OMDoc

namespace {

std::string xml_attr(std::string_view v) {
  std::string out;
  for (char c : v) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string cdata(std::string_view v) {
  std::string out = "<![CDATA[";
  std::size_t from = 0;
  while (true) {
    auto k = v.find("]]>", from);
    if (k == std::string_view::npos) break;
    out.append(v.substr(from, k + 2 - from));
    out += "]]><![CDATA[";
    from = k + 2;
  }
  out.append(v.substr(from));
  out += "]]>";
  return out;
}

}  // namespace

std::string omdoc_of(const TheoryDoc& doc, const Resolution& /*resolution*/) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<omdoc:theory xmlns:omdoc=\"" + std::string(kOmdocNamespace) + "\" name=\"" +
         xml_attr(doc.name) + "\"";
  bool any = std::any_of(doc.commands.begin(), doc.commands.end(),
                         [](const Command& c) { return c.is_declaration(); });
  if (!any) return out + "/>\n";
  out += ">\n";
  for (const auto& cmd : doc.commands) {
    if (!cmd.is_declaration()) continue;
    std::string tag = "omdoc:" + std::string(to_string(cmd.decl_kind()));
    std::string ref =
        doc.file + ":" + std::to_string(cmd.pos.start) + ":" + std::to_string(cmd.pos.stop);
    out += "  <" + tag + " name=\"" + xml_attr(cmd.decl_name()) + "\" sourceref=\"" +
           xml_attr(ref) + "\">" + cdata(cmd.payload().text) + "</" + tag + ">\n";
  }
  out += "</omdoc:theory>\n";
  return out;
}

// ---------------------------------------------------------------------------
// Payload and store

ExportPayload make_payload(const TheoryDoc& doc, const Resolution& resolution) {
  ExportPayload p;
  p.markup = markup_of(doc, resolution);
  p.markup_json = markup_json(doc, p.markup);
  p.omdoc = omdoc_of(doc, resolution);
  p.triples = rdf_of(doc, resolution);
  return p;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::storage, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const fs::path& path, std::string_view bytes) {
  static std::atomic<unsigned long> counter{0};
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::storage, "cannot create directory for " + path.string() + ": " + ec.message());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::storage, "cannot write " + path.string() + " via " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::storage, "short write to " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::storage, "cannot rename into " + path.string());
  }
}

namespace {

// Owning theory of an IRI in the corpus scheme; empty if foreign.
std::string theory_of_subject(const Term& subject) {
  constexpr std::string_view prefix = "corpus:/theory/";
  std::string_view v = subject.value;
  if (subject.kind != Term::Kind::iri || v.substr(0, prefix.size()) != prefix) return {};
  v.remove_prefix(prefix.size());
  return std::string(v.substr(0, v.find('#')));
}

}  // namespace

Store::Store(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  if (fs::exists(corpus_path(), ec)) {
    std::map<TheoryName, std::vector<Triple>> grouped;
    for (auto& t : parse_ntriples(read_file(corpus_path())))
      grouped[theory_of_subject(t.subject)].push_back(std::move(t));
    for (auto& [theory, triples] : grouped) {
      std::sort(triples.begin(), triples.end());
      blocks_[theory] = to_ntriples(triples);
    }
  } else {
    flush_corpus();
  }
}

std::shared_ptr<Store> Store::shared(const fs::path& root) {
  static std::mutex mu;
  static std::map<fs::path, std::weak_ptr<Store>> registry;
  std::lock_guard lock(mu);
  auto key = fs::weakly_canonical(root);
  if (auto s = registry[key].lock()) return s;
  auto s = std::make_shared<Store>(root);
  registry[key] = s;
  return s;
}

fs::path Store::markup_path(const SessionName& s, const TheoryName& t) const {
  return root_ / "sessions" / s / "theories" / (t + ".markup.json");
}

fs::path Store::omdoc_path(const SessionName& s, const TheoryName& t) const {
  return root_ / "sessions" / s / "theories" / (t + ".omdoc.xml");
}

fs::path Store::corpus_path() const { return root_ / "rdf" / "corpus.nt"; }

void Store::write(const SessionName& session, const TheoryName& theory,
                  const ExportPayload& payload) {
  atomic_write(markup_path(session, theory), payload.markup_json);
  atomic_write(omdoc_path(session, theory), payload.omdoc);
  std::lock_guard lock(mu_);
  blocks_[theory] = to_ntriples(payload.triples);
  flush_corpus();
}

void Store::remove(const SessionName& session, const TheoryName& theory) {
  std::error_code ec;
  fs::remove(markup_path(session, theory), ec);
  fs::remove(omdoc_path(session, theory), ec);
  // Drop now-empty directories so the tree matches a build that never wrote them.
  auto dir = markup_path(session, theory).parent_path();
  fs::remove(dir, ec);
  fs::remove(dir.parent_path(), ec);
  std::lock_guard lock(mu_);
  if (blocks_.erase(theory)) flush_corpus();
}

void Store::flush_corpus() {
  std::string text;
  for (const auto& [_, block] : blocks_) text += block;
  atomic_write(corpus_path(), text);
}

void write_store(const fs::path& out_dir, const SessionName& session, const TheoryName& theory,
                 const ExportPayload& payload) {
  Store::shared(out_dir)->write(session, theory, payload);
}

}  // namespace forge
