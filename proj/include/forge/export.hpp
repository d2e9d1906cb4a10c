#pragma once

// Export representations of a checked theory: semantic markup over the
// source, canonical OMDoc-style XML, and RDF triples (N-Triples), plus the
// on-disk store they are written to.
//
// IRI scheme:
//   theory       corpus:/theory/<Theory>
//   declaration  corpus:/theory/<Theory>#<name>
// Predicates and classes live in the ULO namespace (kUloNamespace).

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/model.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Resolution results (produced by the checker, consumed by the exporters)

struct Target {
  std::string long_name;  // Theory.name
  DeclKind kind;
  Position pos;
};

struct ResolvedOccurrence {
  std::string name;
  Position pos;
  std::size_t command = 0;  // index into TheoryDoc::commands
  bool is_fact = false;      // from a `by (...)` clause rather than a payload
  std::optional<Target> target;
};

using Resolution = std::vector<ResolvedOccurrence>;

// ---------------------------------------------------------------------------
// Markup

enum class MarkupKind { keyword, string, entity_def, entity_ref, error };

std::string_view to_string(MarkupKind kind);

struct MarkupNode {
  Position range;
  MarkupKind kind;
  std::vector<std::pair<std::string, std::string>> properties;
  std::vector<MarkupNode> children;
};

struct MarkupTree {
  std::vector<MarkupNode> roots;
};

MarkupTree markup_of(const TheoryDoc& doc, const Resolution& resolution);

/// Sibling ranges sorted and disjoint, children strictly inside parents,
/// everything within [0, file_size]. Returns a description of the first
/// violation, or nullopt.
std::optional<std::string> markup_violation(const MarkupTree& tree, std::size_t file_size);

std::string markup_json(const TheoryDoc& doc, const MarkupTree& tree);

// ---------------------------------------------------------------------------
// RDF

inline constexpr std::string_view kUloNamespace = "https://mathhub.info/ulo#";
inline constexpr std::string_view kXsdInteger = "http://www.w3.org/2001/XMLSchema#integer";

struct Term {
  enum class Kind { iri, string, integer };
  Kind kind = Kind::iri;
  std::string value;

  static Term iri(std::string v) { return {Kind::iri, std::move(v)}; }
  static Term literal(std::string v) { return {Kind::string, std::move(v)}; }
  static Term integer(long long v) { return {Kind::integer, std::to_string(v)}; }

  std::string ntriples() const;
  bool operator==(const Term&) const = default;
  auto operator<=>(const Term& o) const { return ntriples() <=> o.ntriples(); }
};

struct Triple {
  Term subject;
  Term predicate;
  Term object;

  std::string ntriples() const;  // one line, no trailing LF
  bool operator==(const Triple&) const = default;
  auto operator<=>(const Triple&) const = default;
};

std::string theory_iri(std::string_view theory);
std::string declaration_iri(std::string_view theory, std::string_view name);
std::string ulo(std::string_view local);

/// 1 + imports + 3 per declaration + distinct use targets per declaration,
/// sorted by (subject, predicate, object).
std::vector<Triple> rdf_of(const TheoryDoc& doc, const Resolution& resolution);

std::string to_ntriples(const std::vector<Triple>& triples);

/// Strict N-Triples reader for the subset this exporter emits (IRIs, plain
/// and xsd:integer literals; no blank nodes or language tags). Throws
/// Error{syntax} with the line number.
std::vector<Triple> parse_ntriples(std::string_view text);

// ---------------------------------------------------------------------------
// OMDoc

inline constexpr std::string_view kOmdocNamespace = "http://omdoc.org/ns";

std::string omdoc_of(const TheoryDoc& doc, const Resolution& resolution);

// ---------------------------------------------------------------------------
// Payload and store

struct ExportPayload {
  MarkupTree markup;
  std::string markup_json;
  std::string omdoc;
  std::vector<Triple> triples;
};

ExportPayload make_payload(const TheoryDoc& doc, const Resolution& resolution);

/// Export tree rooted at `root`:
///   sessions/<S>/theories/<T>.markup.json
///   sessions/<S>/theories/<T>.omdoc.xml
///   rdf/corpus.nt
/// Every file is replaced atomically. corpus.nt holds the triples of every
/// theory written so far, grouped by theory name, so it does not depend on
/// the order of commits; rewriting a theory replaces its block.
class Store {
 public:
  explicit Store(std::filesystem::path root);

  /// Process-wide store for `root`, shared by concurrent writers.
  static std::shared_ptr<Store> shared(const std::filesystem::path& root);

  void write(const SessionName& session, const TheoryName& theory, const ExportPayload& payload);
  void remove(const SessionName& session, const TheoryName& theory);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path markup_path(const SessionName& s, const TheoryName& t) const;
  std::filesystem::path omdoc_path(const SessionName& s, const TheoryName& t) const;
  std::filesystem::path corpus_path() const;

 private:
  void flush_corpus();

  std::filesystem::path root_;
  std::mutex mu_;
  std::map<TheoryName, std::string> blocks_;  // N-Triples text per theory
};

void write_store(const std::filesystem::path& out_dir, const SessionName& session,
                 const TheoryName& theory, const ExportPayload& payload);

/// Writes `bytes` to `path` through a temporary file and rename.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace forge
