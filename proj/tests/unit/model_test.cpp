#include "doctest.h"

#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/model.hpp"

using namespace forge;

TEST_CASE("line_column_of counts LF-terminated lines") {
  CHECK(line_column_of("", 0) == LineColumn{1, 1});
  CHECK(line_column_of("ab\ncd", 3) == LineColumn{2, 1});
  CHECK(line_column_of("ab\ncd", 5) == LineColumn{2, 3});
  CHECK(line_column_of("ab\ncd", 2) == LineColumn{1, 3});
  CHECK(line_column_of("\n\n", 2) == LineColumn{3, 1});
}

TEST_CASE("line_column_of rejects offsets past the end") {
  try {
    line_column_of("abc", 4);
    FAIL("expected range error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::range);
  }
}

TEST_CASE("make_position fills line and column of start") {
  auto p = make_position("X.thy", "one\ntwo three", 8, 13);
  CHECK(p.file == "X.thy");
  CHECK(p.start == 8);
  CHECK(p.stop == 13);
  CHECK(p.line == 2);
  CHECK(p.column == 5);
}

TEST_CASE("node status transition table") {
  using S = NodeStatus;
  auto legal = [](S a, S b) {
    if (b == S::pending) return true;
    return (a == S::pending && b == S::running) ||
           (a == S::running && (b == S::finished_ok || b == S::finished_failed)) ||
           (a == S::finished_ok && b == S::committed) || (a == S::committed && b == S::purged);
  };
  int allowed = 0;
  for (S a : kAllStatuses)
    for (S b : kAllStatuses) {
      CAPTURE(to_string(a));
      CAPTURE(to_string(b));
      CHECK(legal_transition(a, b) == legal(a, b));
      allowed += legal_transition(a, b);
    }
  CHECK(allowed == 6 + 5);
  CHECK_FALSE(legal_transition(S::finished_failed, S::committed));
  CHECK_FALSE(legal_transition(S::purged, S::committed));
}

TEST_CASE("status names round-trip") {
  for (NodeStatus s : kAllStatuses) CHECK(status_from_string(to_string(s)) == s);
  CHECK_FALSE(status_from_string("done").has_value());
}

TEST_CASE("digest is lowercase hex sha-256") {
  CHECK(digest("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(digest("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(digest("a") != digest("b"));
}

TEST_CASE("error kinds have names") {
  CHECK(to_string(ErrorKind::cycle) == "cycle");
  CHECK(to_string(ErrorKind::empty) == "empty");
  SourceError e(ErrorKind::syntax, Position{"A.thy", 4, 5, 2, 3}, "boom");
  CHECK(std::string(e.what()) == "A.thy:2:3: boom");
  CycleError c({"A", "B", "A"});
  CHECK(c.cycle().front() == c.cycle().back());
}
