#pragma once

// Shared fixtures: scratch directories, corpus writers and a random corpus
// generator whose theories always check cleanly.

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace forge::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "forge") {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct CorpusText {
  std::string root;
  std::map<std::string, std::string> theories;  // name -> source
};

inline void write_corpus(const fs::path& dir, const CorpusText& c) {
  write_text(dir / "ROOT", c.root);
  for (const auto& [name, src] : c.theories) write_text(dir / (name + ".thy"), src);
}

/// Relative path -> bytes for every file under `dir` except the build log.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel.rfind("log/", 0) == 0) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[rel] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

struct GenTheory {
  std::string name;
  std::vector<std::string> imports;
  std::vector<std::string> decls;     // declared short names
  int salt = 0;
};

/// A corpus of `n` theories T00..; theory i may import any earlier theory
/// and references its own earlier declarations and those of direct imports.
/// Sessions form a parent chain so every earlier theory is in scope.
class CorpusGen {
 public:
  CorpusGen(std::uint64_t seed, int n, int sessions = 3) : rng_(seed) {
    sessions = std::max(1, std::min(sessions, n));
    for (int i = 0; i < n; ++i) {
      GenTheory t;
      t.name = name_of(i);
      for (int j = 0; j < i; ++j)
        if (pick(0, 99) < (i - j <= 2 ? 45 : 12)) t.imports.push_back(name_of(j));
      int decls = pick(0, 4);
      for (int d = 0; d < decls; ++d) {
        std::string dn = "d" + std::to_string(i) + "_" + std::to_string(d);
        t.decls.push_back(dn);
      }
      theories_.push_back(std::move(t));
    }
    for (int i = 0; i < n; ++i) session_of_.push_back(i * sessions / n);
    sessions_ = sessions;
    for (auto& t : theories_) t.salt = pick(0, 1 << 20);
  }

  int size() const { return static_cast<int>(theories_.size()); }
  const std::vector<GenTheory>& theories() const { return theories_; }

  static std::string name_of(int i) {
    std::string s = std::to_string(i);
    return "T" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
  }

  std::string root_text() const {
    std::string out;
    for (int s = 0; s < sessions_; ++s) {
      out += "session S" + std::to_string(s) + " (" + (s % 2 ? "slow" : "main") + ")";
      if (s > 0) out += " = S" + std::to_string(s - 1) + " +";
      out += "\n  theories";
      for (int i = 0; i < size(); ++i)
        if (session_of_[i] == s) out += " " + theories_[i].name;
      out += "\n";
    }
    return out;
  }

  /// Source of theory i; `variant` perturbs the body without changing the
  /// import list, so different variants have different digests.
  std::string source(int i, int variant = 0) const {
    const auto& t = theories_[i];
    std::mt19937_64 rng(static_cast<std::uint64_t>(t.salt) * 7919 + variant);
    auto rnd = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::vector<std::string> visible;
    std::vector<std::string> facts;
    for (const auto& imp : t.imports) {
      const auto& it = theories_[index_of(imp)];
      for (std::size_t d = 0; d < it.decls.size(); ++d) {
        visible.push_back(it.decls[d]);
        if (kind_of(it, d) == 2) facts.push_back(it.decls[d]);
      }
    }
    std::string out = "theory " + t.name;
    if (!t.imports.empty()) {
      out += " imports";
      for (const auto& imp : t.imports) out += " " + imp;
    }
    out += " begin\n";
    if (variant % 3 == 1) out += "section \"variant " + std::to_string(variant) + "\"\n";
    for (std::size_t d = 0; d < t.decls.size(); ++d) {
      auto body = [&] {
        std::string b;
        int refs = visible.empty() ? 0 : rnd(0, 3);
        for (int r = 0; r < refs; ++r) {
          if (!b.empty()) b += r % 2 ? " => " : " + ";
          b += visible[rnd(0, static_cast<int>(visible.size()) - 1)];
        }
        return b.empty() ? std::string("'a") : b;
      };
      switch (kind_of(t, d)) {
        case 0: out += "const " + t.decls[d] + " :: \"" + body() + "\"\n"; break;
        case 1: out += "definition " + t.decls[d] + " = \"" + body() + "\"\n"; break;
        default: {
          out += "theorem " + t.decls[d] + " : \"" + body() + "\"";
          if (!facts.empty() && rnd(0, 1)) out += " by (" + facts[rnd(0, static_cast<int>(facts.size()) - 1)] + ")";
          out += " cost " + std::to_string(rnd(0, 40) + variant % 5);
          out += "\n";
          facts.push_back(t.decls[d]);
        }
      }
      visible.push_back(t.decls[d]);
    }
    out += "end\n";
    if (variant != 0) out += "(* variant " + std::to_string(variant) + " *)\n";
    return out;
  }

  CorpusText corpus(const std::map<int, int>& variants = {}) const {
    CorpusText c;
    c.root = root_text();
    for (int i = 0; i < size(); ++i) {
      auto v = variants.find(i);
      c.theories[theories_[i].name] = source(i, v == variants.end() ? 0 : v->second);
    }
    return c;
  }

  int index_of(const std::string& name) const { return std::stoi(name.substr(1)); }

 private:
  // 0 const, 1 definition, 2 theorem; fixed per declaration so that facts
  // stay theorems across variants.
  static int kind_of(const GenTheory& t, std::size_t d) {
    return static_cast<int>((t.salt + d * 5) % 3);
  }
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::mt19937_64 rng_;
  std::vector<GenTheory> theories_;
  std::vector<int> session_of_;
  int sessions_ = 1;
};

}  // namespace forge::testing
