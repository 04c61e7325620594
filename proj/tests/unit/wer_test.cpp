#include <doctest.h>

#include <functional>
#include <random>

#include "vpc/wer.hpp"

using namespace vpc::wer;

namespace {

// Textbook recursive edit distance with memoisation; independent of align().
std::size_t memo_distance(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::vector<int>> memo(a.size() + 1, std::vector<int>(b.size() + 1, -1));
  std::function<int(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> int {
    if (i == a.size()) return static_cast<int>(b.size() - j);
    if (j == b.size()) return static_cast<int>(a.size() - i);
    int& m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({d(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1), d(i + 1, j) + 1, d(i, j + 1) + 1});
    return m;
  };
  return static_cast<std::size_t>(d(0, 0));
}

TokenSeq random_seq(std::mt19937& rng, std::size_t max_len, int alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> sym(0, alphabet - 1);
  TokenSeq s(len(rng));
  for (auto& t : s) t = std::string(1, static_cast<char>('a' + sym(rng)));
  return s;
}

}  // namespace

TEST_CASE("beehive example") {
  const TokenSeq ref{"a", "beehive"};
  const TokenSeq hyp{"a", "be", "hi", "hat"};
  const auto a = align(ref, hyp);
  const std::vector<EditStep> expected{{EditOp::kMatch, "a", "a"},
                                       {EditOp::kSubstitute, "beehive", "be"},
                                       {EditOp::kInsert, "", "hi"},
                                       {EditOp::kInsert, "", "hat"}};
  CHECK(a.steps == expected);
  const auto s = compute_wer(ref, hyp);
  CHECK(s.substitutions == 1);
  CHECK(s.insertions == 2);
  CHECK(s.deletions == 0);
  CHECK(s.ref_len == 2);
  CHECK(s.wer == 1.5);
}

TEST_CASE("edge cases") {
  SUBCASE("identical") {
    const auto s = compute_wer({"x", "y"}, {"x", "y"});
    CHECK(s.wer == 0.0);
    CHECK(s.errors() == 0);
  }
  SUBCASE("empty hypothesis deletes everything") {
    const auto s = compute_wer({"x", "y", "z"}, {});
    CHECK(s.deletions == 3);
    CHECK(s.wer == 1.0);
  }
  SUBCASE("both empty is degenerate") {
    const auto s = compute_wer({}, {});
    CHECK(s.degenerate);
    CHECK(s.wer == 0.0);
    CHECK(s.ref_len == 0);
  }
  SUBCASE("empty reference with words") { CHECK_THROWS_AS(compute_wer({}, {"oops"}), EmptyReference); }
  SUBCASE("wer may exceed one") { CHECK(compute_wer({"a"}, {"b", "c", "d"}).wer == 3.0); }
}

TEST_CASE("brute force agrees with the memoised recursion") {
  std::mt19937 rng(17);
  for (int i = 0; i < 3000; ++i) {
    const auto r = random_seq(rng, 7, 3);
    const auto h = random_seq(rng, 7, 3);
    REQUIRE(brute_force_distance(r, h) == memo_distance(r, h));
  }
  CHECK_THROWS_AS(brute_force_distance(TokenSeq(8, "a"), {}), InputTooLarge);
}

TEST_CASE("alignment properties on random pairs") {
  std::mt19937 rng(4242);
  for (int i = 0; i < 2000; ++i) {
    const auto r = random_seq(rng, 12, 4);
    const auto h = random_seq(rng, 12, 4);
    const auto a = align(r, h);
    INFO("case " << i);
    // Reconstruction.
    REQUIRE(a.ref_tokens() == r);
    REQUIRE(a.hyp_tokens() == h);
    // Optimality.
    REQUIRE(a.cost() == memo_distance(r, h));
    // Determinism.
    REQUIRE(align(r, h) == a);
    // Symmetry of cost with insertions and deletions swapped.
    const auto back = align(h, r);
    REQUIRE(back.cost() == a.cost());
    if (!r.empty()) {
      const auto s = compute_wer(r, h);
      REQUIRE(s.errors() == a.cost());
      REQUIRE(s.wer == static_cast<double>(a.cost()) / static_cast<double>(r.size()));
      if (!h.empty()) {
        const auto u = compute_wer(h, r);
        REQUIRE(u.substitutions + u.insertions + u.deletions == s.errors());
      }
    }
    // Triangle inequality through a third sequence.
    const auto m = random_seq(rng, 12, 4);
    REQUIRE(a.cost() <= align(r, m).cost() + align(m, h).cost());
  }
}

TEST_CASE("alignment step contents are well formed") {
  std::mt19937 rng(8);
  for (int i = 0; i < 500; ++i) {
    const auto a = align(random_seq(rng, 9, 3), random_seq(rng, 9, 3));
    for (const auto& st : a.steps) {
      switch (st.op) {
        case EditOp::kMatch:
          REQUIRE(st.ref == st.hyp);
          break;
        case EditOp::kSubstitute:
          REQUIRE(st.ref != st.hyp);
          break;
        case EditOp::kInsert:
          REQUIRE(st.ref.empty());
          break;
        case EditOp::kDelete:
          REQUIRE(st.hyp.empty());
          break;
      }
    }
  }
}

TEST_CASE("pooled and macro aggregation") {
  SUBCASE("long clips dominate the pooled figure") {
    std::map<std::string, WerStats> m;
    m["long"] = compute_wer(TokenSeq(90, "w"), TokenSeq(90, "w"));
    TokenSeq short_hyp(10, "w");
    for (int i = 0; i < 5; ++i) short_hyp[i] = "x";
    m["short"] = compute_wer(TokenSeq(10, "w"), short_hyp);
    const auto c = aggregate(m);
    // 5 errors over 100 reference words; mean of 0.0 and 0.5.
    CHECK(c.pooled_wer == doctest::Approx(0.05));
    CHECK(c.macro_wer == doctest::Approx(0.25));
    CHECK(c.total_errors == 5);
    CHECK(c.total_ref_len == 100);
  }
  SUBCASE("uniform clips give equal figures") {
    std::map<std::string, WerStats> m;
    for (int i = 0; i < 100; ++i) {
      WerStats s;
      s.substitutions = 91;
      s.ref_len = 200;
      s.wer = 91.0 / 200.0;
      m["c" + std::to_string(i)] = s;
    }
    const auto c = aggregate(m);
    CHECK(c.pooled_wer == doctest::Approx(0.455).epsilon(1e-12));
    CHECK(c.macro_wer == doctest::Approx(0.455).epsilon(1e-12));
  }
  SUBCASE("degenerate clips count as zero in macro and nothing in pooled") {
    std::map<std::string, WerStats> m;
    m["empty"] = compute_wer({}, {});
    m["half"] = compute_wer({"a", "b"}, {"a", "c"});
    const auto c = aggregate(m);
    CHECK(c.pooled_wer == 0.5);
    CHECK(c.macro_wer == 0.25);
  }
  SUBCASE("empty corpus") { CHECK_THROWS_AS(aggregate({}), EmptyCorpus); }
}
