#pragma once

// A corpus directory: one `ROOT` catalog plus `<Theory>.thy` sources next
// to it.

#include <filesystem>
#include <map>
#include <string>

#include "forge/model.hpp"

namespace forge {

struct Corpus {
  std::filesystem::path dir;
  Catalog catalog;
  std::map<TheoryName, Bytes> sources;  // theories whose file exists
};

/// Reads `dir/ROOT` and every listed theory file that exists. Missing theory
/// files are left out of `sources` and reported by planning. Throws
/// Error{storage} if ROOT cannot be read and SourceError for catalog errors.
Corpus load_corpus(const std::filesystem::path& dir);

struct Counts {
  std::size_t sessions = 0;
  std::size_t theories = 0;
  std::size_t constants = 0;
  std::size_t definitions = 0;
  std::size_t theorems = 0;
  std::size_t sections = 0;
  std::size_t bytes = 0;
  std::size_t unparsed = 0;  // theories missing or failing to parse
};

struct CorpusStats {
  Counts total;
  std::map<std::string, Counts> groups;
  std::vector<std::pair<SessionName, Counts>> sessions;  // catalog order
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string stats_json(const CorpusStats& stats);
/// Header `scope,name,sessions,theories,constants,definitions,theorems,sections,bytes,unparsed`.
std::string stats_csv(const CorpusStats& stats);

}  // namespace forge
