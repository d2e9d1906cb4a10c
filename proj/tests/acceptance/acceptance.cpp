// Acceptance suite: one PASS/FAIL line per criterion, each with its time
// budget. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "../line_client.hpp"
#include "../oracles.hpp"
#include "../support.hpp"
#include "forge/corpus.hpp"
#include "forge/engine.hpp"
#include "forge/server.hpp"
#include "forge/syntax.hpp"

using namespace forge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;
using Sources = std::map<TheoryName, Bytes>;

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Records the first failure; later ones are counted but not described.
class Check {
 public:
  bool operator()(bool cond, const std::string& what) {
    if (!cond) {
      if (failures_++ == 0) first_ = what;
    }
    return cond;
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " failure(s), first: " + first_};
  }

 private:
  std::size_t failures_ = 0;
  std::string first_;
};

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

BuildPlan plan_all(const std::string& root, const Sources& sources) {
  Selection sel;
  sel.all = true;
  return plan(parse_catalog(root), sel, sources);
}

Sources sources_of(const testing::CorpusText& c) { return {c.theories.begin(), c.theories.end()}; }

BuildReport build_into(const fs::path& out, const BuildPlan& p, unsigned workers) {
  auto store = std::make_shared<Store>(out);
  StoreConsumer consumer(store);
  EngineConfig cfg;
  cfg.workers = workers;
  return run_build(p, cfg, consumer);
}

std::string differing_file(const std::map<std::string, std::string>& a,
                           const std::map<std::string, std::string>& b) {
  std::set<std::string> keys;
  for (const auto& [k, _] : a) keys.insert(k);
  for (const auto& [k, _] : b) keys.insert(k);
  for (const auto& k : keys) {
    auto x = a.find(k), y = b.find(k);
    if (x == a.end() || y == b.end() || x->second != y->second) return k;
  }
  return "";
}

// ---------------------------------------------------------------------------

Outcome factor_arithmetic() {
  Check check;
  auto f1 = format_factor(factor(51, 1547));
  auto f2 = format_factor(factor(74, 2531));
  check(f1 == "30.3", "factor(51, 1547) = " + f1);
  check(f2 == "34.2", "factor(74, 2531) = " + f2);
  return check.outcome(f1 + " " + f2);
}

Outcome graph_oracles() {
  Check check;
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 500; ++round) {
    int n = std::uniform_int_distribution<int>(1, 12)(rng);
    double density = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    auto edges = oracle::random_dag(rng, n, density);
    std::vector<int> nodes(n);
    for (int i = 0; i < n; ++i) nodes[i] = i;
    auto g = DepGraph<int>::build(nodes, edges);
    auto reach = oracle::closure(n, edges);
    std::string tag = "dag " + std::to_string(round);
    for (int v = 0; v < n; ++v) {
      std::set<int> anc, desc;
      for (int u = 0; u < n; ++u) {
        if (reach[u][v]) anc.insert(u);
        if (reach[v][u]) desc.insert(u);
      }
      check(g.ancestors(v) == anc, tag + ": ancestors of " + std::to_string(v));
      check(g.descendants(v) == desc, tag + ": descendants of " + std::to_string(v));
    }
    // Valid, and at every step the least node whose ancestors are all placed.
    auto order = g.topo_order();
    check(oracle::is_topological(n, edges, order), tag + ": not topological");
    std::vector<bool> placed(n, false);
    for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(n); ++i) {
      int least = -1;
      for (int v = 0; v < n && least < 0; ++v) {
        if (placed[v]) continue;
        bool ready = true;
        for (int u = 0; u < n; ++u)
          if (reach[u][v] && !placed[u]) ready = false;
        if (ready) least = v;
      }
      check(order[i] == least, tag + ": topo order not lexicographically least");
      if (order[i] >= 0 && order[i] < n) placed[order[i]] = true;
    }
  }
  for (int round = 0; round < 500; ++round) {
    int n = std::uniform_int_distribution<int>(1, 12)(rng);
    double density = std::uniform_real_distribution<double>(0.02, 0.3)(rng);
    auto edges = oracle::random_digraph(rng, n, density);
    std::vector<int> nodes(n);
    for (int i = 0; i < n; ++i) nodes[i] = i;
    bool cyclic = oracle::has_cycle(n, edges);
    std::string tag = "digraph " + std::to_string(round);
    try {
      DepGraph<int>::build(nodes, edges);
      check(!cyclic, tag + ": cycle not detected");
    } catch (const CycleError& e) {
      check(cyclic, tag + ": spurious cycle");
      const auto& c = e.cycle();
      std::set<std::pair<int, int>> es(edges.begin(), edges.end());
      bool closed = c.size() >= 2 && c.front() == c.back();
      for (std::size_t i = 0; closed && i + 1 < c.size(); ++i)
        closed = es.count({std::stoi(c[i]), std::stoi(c[i + 1])}) != 0;
      check(closed, tag + ": witness is not a cycle");
    }
  }
  return check.outcome("500 DAGs, 500 digraphs");
}

Outcome build_determinism() {
  Check check;
  testing::CorpusGen gen(50, 50, 4);
  auto p = plan_all(gen.root_text(), sources_of(gen.corpus()));
  testing::TempDir dir("forge-acc3");
  std::map<std::string, std::string> reference;
  std::size_t files = 0;
  for (unsigned workers : {1u, 4u, 8u}) {
    for (int run = 0; run < 2; ++run) {
      auto out = dir / ("w" + std::to_string(workers) + "-" + std::to_string(run));
      auto report = build_into(out, p, workers);
      check(report.all_ok(), "build failed with " + std::to_string(workers) + " workers");
      auto snap = testing::snapshot(out);
      if (reference.empty()) {
        reference = snap;
        files = snap.size();
        continue;
      }
      check(snap == reference, "store differs with " + std::to_string(workers) +
                                   " workers at " + differing_file(snap, reference));
    }
  }
  check(files == 2 * 50 + 1, "expected 101 store files, got " + std::to_string(files));
  return check.outcome("6 builds, " + std::to_string(files) + " identical files");
}

std::string dag_theory(int i) {
  std::string s = std::to_string(i);
  return "N" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

Outcome scheduler_bounds() {
  Check check;
  std::mt19937_64 rng(4);
  std::size_t engine_runs = 0;
  for (int round = 0; round < 200; ++round) {
    int n = std::uniform_int_distribution<int>(1, 12)(rng);
    auto edges = oracle::random_dag(rng, n, std::uniform_real_distribution<double>(0.0, 0.5)(rng));
    std::vector<std::uint64_t> cost(n);
    std::uint64_t total = 0;
    for (auto& c : cost) total += c = std::uniform_int_distribution<std::uint64_t>(0, 50)(rng);
    std::uint64_t cp = oracle::critical_path(n, edges, cost);

    std::vector<TheoryName> names;
    std::vector<std::pair<TheoryName, TheoryName>> named;
    std::map<TheoryName, std::uint64_t> costs;
    for (int i = 0; i < n; ++i) {
      names.push_back(dag_theory(i));
      costs[dag_theory(i)] = cost[i];
    }
    for (auto [u, v] : edges) named.emplace_back(dag_theory(u), dag_theory(v));
    auto g = DepGraph<TheoryName>::build(names, named);

    // The same DAG as a corpus, so the engine's own dispatch is measured too.
    Sources sources;
    std::string root = "session S theories";
    for (int i = 0; i < n; ++i) {
      root += " " + dag_theory(i);
      std::string src = "theory " + dag_theory(i);
      std::string imports;
      for (auto [u, v] : edges)
        if (v == i) imports += " " + dag_theory(u);
      if (!imports.empty()) src += " imports" + imports;
      src += " begin theorem t : \"'a\" cost " + std::to_string(cost[i]) + " end\n";
      sources[dag_theory(i)] = src;
    }
    auto p = plan_all(root, sources);

    for (unsigned k : {1u, 2u, 4u}) {
      std::string tag = "dag " + std::to_string(round) + " k=" + std::to_string(k);
      std::uint64_t lower = std::max<std::uint64_t>(cp, (total + k - 1) / k);
      auto sim = simulate_schedule(g, costs, k);
      check(sim.makespan >= lower && sim.makespan <= total,
            tag + ": makespan " + std::to_string(sim.makespan) + " outside [" +
                std::to_string(lower) + ", " + std::to_string(total) + "]");
      if (k == 1) check(sim.makespan == total, tag + ": serial makespan is not the total");
      auto b = makespan_bounds(g, costs, k);
      check(b.upper == total && b.lower == lower, tag + ": makespan_bounds disagrees");

      FunctionConsumer sink([](const SessionName&, const TheoryName&, const ExportPayload&) {});
      EngineConfig cfg;
      cfg.workers = k;
      auto report = run_build(p, cfg, sink);
      ++engine_runs;
      auto m = report.simulated_makespan_ms;
      check(report.all_ok(), tag + ": engine build failed");
      check(m == sim.makespan, tag + ": engine makespan " + std::to_string(m) +
                                   " differs from simulation " + std::to_string(sim.makespan));
    }
  }
  return check.outcome("200 DAGs x 3 worker counts, " + std::to_string(engine_runs) + " engine runs");
}

Outcome incremental_correctness() {
  Check check;
  std::mt19937_64 rng(5);
  testing::TempDir dir("forge-acc5");
  for (int pair = 0; pair < 100; ++pair) {
    int n = std::uniform_int_distribution<int>(3, 14)(rng);
    testing::CorpusGen gen(rng(), n, 3);
    auto original = gen.corpus();
    int edited = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int variant = std::uniform_int_distribution<int>(1, 1000)(rng);
    std::string tag = "pair " + std::to_string(pair) + " edit " + testing::CorpusGen::name_of(edited);

    // Expected invalidation: the edited theory and everything reaching it.
    oracle::Edges edges;
    for (int i = 0; i < n; ++i)
      for (const auto& imp : gen.theories()[i].imports) edges.emplace_back(gen.index_of(imp), i);
    auto reach = oracle::closure(n, edges);
    std::set<TheoryName> expected{testing::CorpusGen::name_of(edited)};
    for (int v = 0; v < n; ++v)
      if (reach[edited][v]) expected.insert(testing::CorpusGen::name_of(v));

    auto inc_out = dir / ("inc" + std::to_string(pair));
    auto store = std::make_shared<Store>(inc_out);
    StoreConsumer consumer(store);
    EngineConfig cfg;
    cfg.workers = std::uniform_int_distribution<unsigned>(1, 4)(rng);
    cfg.purge_watermark = std::uniform_int_distribution<unsigned>(1, 16)(rng);
    Engine engine(plan_all(gen.root_text(), sources_of(original)), cfg, &consumer);
    check(engine.run().all_ok(), tag + ": initial build failed");
    auto invalidated = engine.apply_edit(testing::CorpusGen::name_of(edited), gen.source(edited, variant));
    check(invalidated == expected, tag + ": invalidated set differs from oracle");
    auto rebuilt = engine.run();
    check(rebuilt.all_ok(), tag + ": rebuild failed");
    check(rebuilt.summary.ok == expected.size(), tag + ": rebuild processed " +
                                                      std::to_string(rebuilt.summary.ok) + " nodes");

    auto scratch_out = dir / ("scratch" + std::to_string(pair));
    auto fresh = build_into(scratch_out, plan_all(gen.root_text(), sources_of(gen.corpus({{edited, variant}}))), 1);
    check(fresh.all_ok(), tag + ": scratch build failed");
    auto a = testing::snapshot(inc_out), b = testing::snapshot(scratch_out);
    check(a == b, tag + ": store differs at " + differing_file(a, b));
    std::error_code ec;
    fs::remove_all(inc_out, ec);
    fs::remove_all(scratch_out, ec);
  }
  return check.outcome("100 edit pairs");
}

struct EventLog : EngineObserver {
  struct Event {
    TheoryName theory;
    NodeStatus status;
  };
  std::vector<Event> events;
  std::vector<TheoryName> committed;
  void on_status(const TheoryName& t, NodeStatus s, std::uint64_t) override { events.push_back({t, s}); }
  void on_committed(const TheoryName& t, std::size_t) override { committed.push_back(t); }
};

Outcome commit_purge_protocol() {
  Check check;
  Sources sources{{"A", "theory A begin theorem a : \"'x\" cost 0 end"},
                  {"B", "theory B imports A begin theorem b : \"a\" cost 100 end"},
                  {"C", "theory C imports A begin theorem c : \"a\" cost 100 end"},
                  {"D", "theory D imports B C begin theorem d : \"b c\" cost 0 end"}};
  std::size_t victims = 0;
  for (unsigned workers : {1u, 2u, 4u}) {
    auto p = plan_all("session S theories A B C D", sources);
    EventLog log;
    FunctionConsumer sink([](const SessionName&, const TheoryName&, const ExportPayload&) {});
    EngineConfig cfg;
    cfg.workers = workers;
    cfg.purge_watermark = 1;
    Engine engine(p, cfg, &sink, &log);
    auto report = engine.run();
    std::string tag = std::to_string(workers) + " workers";
    check(report.all_ok(), tag + ": build failed");

    const auto& g = engine.plan().theory_graph;
    std::map<TheoryName, NodeStatus> now;
    std::map<TheoryName, int> commits;
    std::vector<TheoryName> commit_seq;
    for (const auto& e : log.events) {
      auto before = now.count(e.theory) ? now[e.theory] : NodeStatus::pending;
      check(before == e.status || legal_transition(before, e.status),
            tag + ": illegal transition for " + e.theory);
      if (e.status == NodeStatus::committed) {
        ++commits[e.theory];
        commit_seq.push_back(e.theory);
        for (const auto& dep : g.predecessors(e.theory))
          check(commits.count(dep) != 0, tag + ": " + e.theory + " committed before import " + dep);
      }
      if (e.status == NodeStatus::purged) {
        ++victims;
        for (const auto& user : g.successors(e.theory))
          check(now.count(user) && now[user] == NodeStatus::committed,
                tag + ": purged " + e.theory + " while " + user + " was not committed");
      }
      now[e.theory] = e.status;
    }
    for (const auto& t : g.nodes())
      check(commits[t] == 1, tag + ": " + t + " committed " + std::to_string(commits[t]) + " times");
    check(commit_seq == log.committed, tag + ": commit notifications disagree with status events");
    check(report.resident <= 1, tag + ": resident " + std::to_string(report.resident) + " above watermark");
  }
  return check.outcome("3 worker counts, " + std::to_string(victims) + " purge victims checked");
}

Outcome triple_law() {
  Check check;
  std::mt19937_64 rng(7);
  const std::string base = "theory Base begin const p :: \"'a\" theorem q : \"p\" end\n";
  Environment env;
  env.append(check_theory(parse_theory(base, "Base.thy"), Environment{}).delta);

  Sources sources{{"Base", base}};
  std::string root = "session S theories Base";
  std::vector<Triple> expected_all = rdf_of(parse_theory(base, "Base.thy"),
                                            check_theory(parse_theory(base, "Base.thy"), Environment{}).resolution);
  std::size_t clean_count = 1;
  for (int round = 0; round < 100; ++round) {
    std::string name = "R" + std::to_string(100 + round);
    int k = std::uniform_int_distribution<int>(0, 7)(rng);
    std::vector<std::string> pool{"p", "q", "zz"};
    for (int i = 0; i < k; ++i) pool.push_back("n" + std::to_string(i));

    // Brute-force count alongside the source: own earlier names and the
    // imported p, q are in scope; facts name theorems.
    std::string src = "theory " + name + " imports Base begin\n";
    std::set<std::string> own_earlier;
    std::set<std::string> theorems{"Base.q"};
    std::size_t uses = 0;
    bool clean = true;  // every identifier resolves, so the theory checks
    auto resolve = [&](const std::string& id) -> std::string {
      if (own_earlier.count(id)) return name + "." + id;
      if (id == "p" || id == "q") return "Base." + id;
      return "";
    };
    for (int i = 0; i < k; ++i) {
      std::string n = "n" + std::to_string(i);
      std::string body;
      std::set<std::string> targets;
      for (int j = std::uniform_int_distribution<int>(0, 4)(rng); j > 0; --j) {
        // Mostly names in scope; occasionally one that is not, which fails the theory.
        std::vector<std::string> scope{"p", "q"};
        scope.insert(scope.end(), own_earlier.begin(), own_earlier.end());
        const auto& from = std::uniform_int_distribution<int>(0, 19)(rng) == 0 ? pool : scope;
        auto id = from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
        body += id + " ";
        if (auto t = resolve(id); !t.empty())
          targets.insert(t);
        else
          clean = false;
      }
      int kind = std::uniform_int_distribution<int>(0, 2)(rng);
      if (kind == 0) src += "const " + n + " :: \"" + body + "\"\n";
      if (kind == 1) src += "definition " + n + " = \"" + body + "\"\n";
      if (kind == 2) {
        src += "theorem " + n + " : \"" + body + "\"";
        std::vector<std::string> facts;
        for (const auto& t : theorems) facts.push_back(t.substr(t.find('.') + 1));
        if (std::uniform_int_distribution<int>(0, 1)(rng)) {
          auto f = facts[std::uniform_int_distribution<std::size_t>(0, facts.size() - 1)(rng)];
          src += " by (" + f + ")";
          targets.insert(resolve(f));
        }
        src += "\n";
        theorems.insert(name + "." + n);
      }
      uses += targets.size();
      own_earlier.insert(n);
    }
    src += "end\n";
    std::size_t expected = 1 + 1 + 3 * static_cast<std::size_t>(k) + uses;

    auto doc = parse_theory(src, name + ".thy");
    auto ts = rdf_of(doc, check_theory(doc, env).resolution);
    check(ts.size() == expected, name + ": " + std::to_string(ts.size()) + " triples, expected " +
                                     std::to_string(expected));
    check(parse_ntriples(to_ntriples(ts)) == ts, name + ": N-Triples round trip");
    if (clean) {
      expected_all.insert(expected_all.end(), ts.begin(), ts.end());
      ++clean_count;
    }
    sources[name] = src;
    root += " " + name;
  }

  testing::TempDir dir("forge-acc7");
  auto report = build_into(dir.path(), plan_all(root, sources), 4);
  check(report.summary.ok == clean_count, "corpus build checked " + std::to_string(report.summary.ok) +
                                             " theories, expected " + std::to_string(clean_count));
  auto text = read_file(Store(dir.path()).corpus_path());
  auto parsed = parse_ntriples(text);
  auto want = expected_all;
  auto got = parsed;
  std::sort(want.begin(), want.end());
  std::sort(got.begin(), got.end());
  check(got == want, "corpus.nt multiset differs: " + std::to_string(got.size()) + " vs " +
                         std::to_string(want.size()) + " triples");
  check(to_ntriples(parsed) == text, "corpus.nt does not re-serialize to itself");
  return check.outcome("100 theories (" + std::to_string(clean_count - 1) + " clean), corpus.nt " +
                       std::to_string(parsed.size()) + " triples");
}

Outcome server_conformance() {
  Check check;
  testing::TempDir dir("forge-acc8");
  testing::write_corpus(dir / "corpus",
                        {"session S theories A B C D E",
                         {{"A", "theory A begin const a :: \"'a\" theorem ta : \"a\" cost 4 end\n"},
                          {"B", "theory B imports A begin definition b = \"a\" theorem tb : \"b\" by (ta) cost 9 end\n"},
                          {"C", "theory C imports A begin theorem tc : \"a\" by (ta) cost 6 end\n"},
                          {"D", "theory D imports B C begin theorem td : \"b\" by (tb tc) cost 3 end\n"},
                          {"E", "theory E imports D begin definition e = \"b a\" end\n"}}});
  std::map<std::string, std::set<std::string>> imports{
      {"A", {}}, {"B", {"A"}}, {"C", {"A"}}, {"D", {"B", "C"}}, {"E", {"D"}}};

  ServerConfig cfg;
  cfg.out_dir = dir / "out";
  cfg.engine.workers = 2;
  Server server(cfg);
  std::thread runner([&] { server.run(); });
  std::size_t lines = 0;
  {
    testing::LineClient client(server.port());
    auto next = [&]() -> std::optional<json> {
      auto line = client.read_line();
      if (!check(line.has_value(), "server went silent")) return std::nullopt;
      ++lines;
      try {
        return json::parse(*line);
      } catch (const json::exception&) {
        check(false, "output line is not JSON: " + *line);
        return json::object();
      }
    };
    auto reply_for = [&](const json& id, json req_line) -> std::optional<json> {
      client.send_line(req_line.dump());
      for (;;) {
        auto j = next();
        if (!j) return std::nullopt;
        if (j->contains("result")) {
          check((*j)["id"] == id, "reply id " + (*j)["id"].dump() + " for request " + id.dump());
          return j;
        }
      }
    };
    // Events of one build, through its build_finished.
    auto drain_build = [&](const std::string& phase, std::size_t expect_commits) {
      std::uint64_t cpu = 0;
      std::size_t commits = 0;
      std::vector<std::string> finished;
      for (;;) {
        auto j = next();
        if (!j) return;
        auto ev = j->value("event", "");
        if (ev == "timing") cpu += (*j)["cpu_ms"].get<std::uint64_t>();
        if (ev == "committed") ++commits;
        if (ev == "node_status" && (*j)["status"] == "finished_ok") finished.push_back((*j)["theory"]);
        if (ev == "build_finished") {
          check((*j)["cpu_ms"].get<std::uint64_t>() == cpu,
                phase + ": cpu sum " + std::to_string(cpu) + " vs " + (*j)["cpu_ms"].dump());
          break;
        }
      }
      check(commits == expect_commits, phase + ": " + std::to_string(commits) + " commits");
      std::set<std::string> seen;
      for (const auto& t : finished) {
        for (const auto& imp : imports[t])
          check(seen.count(imp) || !std::count(finished.begin(), finished.end(), imp),
                phase + ": " + t + " finished before " + imp);
        seen.insert(t);
      }
      check(finished.size() == expect_commits, phase + ": " + std::to_string(finished.size()) + " finished_ok");
    };

    auto echo = reply_for(1, {{"id", 1}, {"command", "echo"}, {"payload", {{"k", "v"}}}});
    check(echo && (*echo)["payload"]["k"] == "v", "echo payload");

    auto load = reply_for("load", {{"id", "load"}, {"command", "load"}, {"dir", (dir / "corpus").string()}});
    check(load && (*load)["result"] == "ok", "load failed");
    drain_build("load", 5);

    auto edit = reply_for(3, {{"id", 3}, {"command", "edit"}, {"theory", "A"},
                              {"source", "theory A begin const a :: \"'a\" theorem ta : \"a a\" cost 5 end\n"}});
    check(edit && (*edit)["invalidated"] == json({"A", "B", "C", "D", "E"}), "edit invalidation");
    drain_build("edit", 5);

    auto purge = reply_for(4.5, {{"id", 4.5}, {"command", "purge"}});
    check(purge && (*purge)["purged"] == json({"A", "B", "C", "D", "E"}), "purge victims");

    // Malformed traffic: every line gets exactly one parse or protocol error.
    std::mt19937_64 rng(8);
    const std::vector<std::string> shapes{
        "[]", "null", "17", "\"load\"", "{}", R"({"id":1})", R"({"command":7})",
        R"({"command":"dance"})", R"({"command":"load"})", R"({"command":"load","dir":3})",
        R"({"command":"edit"})", R"({"command":"edit","theory":"A"})",
        R"({"command":"edit","theory":1,"source":""})", R"({"command":null})", R"({"command":["echo"]})"};
    const std::string valid = R"({"id":99,"command":"load","dir":"/tmp","selection":{"all":true}})";
    std::size_t fuzzed = 0, bad_replies = 0;
    for (int i = 0; i < 1000; ++i) {
      std::string line;
      switch (i % 4) {
        case 0: {
          int len = std::uniform_int_distribution<int>(0, 80)(rng);
          for (int b = 0; b < len; ++b) {
            char c = static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng));
            if (c != '\n') line += c;
          }
          if (!line.empty() && line[0] == '{') line[0] = '[';
          break;
        }
        case 1: line = valid.substr(0, std::uniform_int_distribution<std::size_t>(1, valid.size() - 1)(rng)); break;
        case 2: line = shapes[i / 4 % shapes.size()]; break;
        default: {
          line = valid;
          line[std::uniform_int_distribution<std::size_t>(0, line.size() - 1)(rng)] = '\x01';
        }
      }
      client.send_line(line);
      ++fuzzed;
      auto j = next();
      if (!j) break;
      bool fine = (*j)["result"] == "error" &&
                  ((*j)["kind"] == "parse" || (*j)["kind"] == "protocol");
      if (!fine) ++bad_replies;
      check(fine, "fuzz line " + std::to_string(i) + " got " + j->dump());
    }
    auto alive = reply_for("after", {{"id", "after"}, {"command", "echo"}});
    check(alive && (*alive)["result"] == "ok", "server unusable after fuzzing");

    auto bye = reply_for(6, {{"id", 6}, {"command", "shutdown"}});
    check(bye && (*bye)["result"] == "ok", "shutdown reply");
    check(!client.read_line(std::chrono::milliseconds(2000)).has_value(), "connection stayed open");
    check(bad_replies == 0 && fuzzed == 1000, "fuzzing incomplete");
  }
  runner.join();
  return check.outcome(std::to_string(lines) + " lines parsed, 1000 fuzz lines rejected");
}

// Token texts are the source slices they cover and every gap re-lexes to
// nothing.
bool tiles(std::string_view src, const std::vector<Token>& toks) {
  std::size_t at = 0;
  for (const auto& t : toks) {
    if (t.pos.start < at || t.pos.stop > src.size() || t.pos.start >= t.pos.stop) return false;
    if (src.substr(t.pos.start, t.pos.stop - t.pos.start) != t.text) return false;
    if (!tokenize(src.substr(at, t.pos.start - at)).empty()) return false;
    at = t.pos.stop;
  }
  return tokenize(src.substr(at)).empty();
}

Outcome parser_robustness() {
  Check check;
  std::mt19937_64 rng(9);
  const std::vector<std::string> pieces{
      "theory", "imports", "begin", "end", "const", "definition", "theorem", "by", "cost",
      "section", "session", "theories", "::", "=", ":", "(", ")", "+", "\"", "\"x y\"", "\"\\\"\"",
      "(*", "*)", "A", "b'", "_c", "0", "123", "99999999999999999999999", " ", "\n", "\t", "\\",
      "\xc3\xa9", "\xff", "\xef\xbf\xbe", "\x7f"};
  std::size_t tokenized = 0, parsed = 0;
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string src;
    if (i % 2 == 0) {
      int len = std::uniform_int_distribution<int>(0, 200)(rng);
      for (int b = 0; b < len; ++b) src += static_cast<char>(std::uniform_int_distribution<int>(0, 255)(rng));
    } else {
      if (i % 4 == 1) src = "theory A imports B begin ";
      for (int k = std::uniform_int_distribution<int>(0, 40)(rng); k > 0; --k) {
        src += pieces[std::uniform_int_distribution<std::size_t>(0, pieces.size() - 1)(rng)];
        if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) src += " ";
      }
    }
    auto t0 = Clock::now();
    try {
      auto toks = tokenize(src, "F.thy");
      ++tokenized;
      check(tiles(src, toks), "tiling fails on input " + std::to_string(i));
    } catch (const Error&) {
    } catch (const std::exception& e) {
      check(false, "tokenize threw " + std::string(e.what()) + " on input " + std::to_string(i));
    }
    for (auto fn : {+[](std::string_view s) { parse_theory(s, "F.thy"); },
                    +[](std::string_view s) { parse_theory_header(s, "F.thy"); },
                    +[](std::string_view s) { parse_catalog(s); }}) {
      try {
        fn(src);
        ++parsed;
      } catch (const Error&) {
      } catch (const std::exception& e) {
        check(false, "parser threw " + std::string(e.what()) + " on input " + std::to_string(i));
      }
    }
    double ms = ms_since(t0);
    worst = std::max(worst, ms);
    check(ms <= 100, "input " + std::to_string(i) + " took " + std::to_string(ms) + " ms");
  }
  std::ostringstream s;
  s << "10000 inputs, " << tokenized << " tokenized, " << parsed << " parses accepted, worst "
    << static_cast<int>(std::ceil(worst)) << " ms";
  return check.outcome(s.str());
}

struct Criterion {
  int number;
  std::string name;
  double budget_ms;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "factor arithmetic", 1, factor_arithmetic},
      {2, "graph oracle equivalence", 10'000, graph_oracles},
      {3, "build determinism", 30'000, build_determinism},
      {4, "scheduler bounds", 10'000, scheduler_bounds},
      {5, "incremental correctness", 60'000, incremental_correctness},
      {6, "commit/purge protocol", 1'000, commit_purge_protocol},
      {7, "triple-count law", 5'000, triple_law},
      {8, "server conformance", 10'000, server_conformance},
      {9, "parser robustness", 0, parser_robustness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    double ms = ms_since(t0);
    bool in_time = c.budget_ms == 0 || ms < c.budget_ms;
    if (!in_time) out.detail += "; over budget of " + std::to_string(static_cast<long>(c.budget_ms)) + " ms";
    bool pass = out.ok && in_time;
    failed += !pass;
    std::printf("%s %d %s (%.3f ms): %s\n", pass ? "PASS" : "FAIL", c.number, c.name.c_str(), ms,
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
