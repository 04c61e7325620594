#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vpc/reporting.hpp"

using namespace vpc;
using namespace vpc::reporting;

namespace {

// Two-row Levenshtein over normalised tokens, independent of wer::align.
std::size_t distance(const textnorm::TokenSeq& a, const textnorm::TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<pipeline::CorrectionRecord> records_for(const corpus::Manifest& m, const std::string& asr,
                                                    const std::string& setting, unsigned seed, bool fix_even) {
  std::vector<pipeline::CorrectionRecord> out;
  const auto hyps = testing::corrupted_hypotheses(m, asr, setting, seed);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    pipeline::CorrectionRecord r;
    r.clip_id = hyps[i].clip_id;
    r.hypothesis = hyps[i];
    r.corrected_text = fix_even && i % 2 == 0 ? m.clips[i].reference : hyps[i].text;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("evaluation matches independent pooled and macro sums") {
  const auto m = testing::synthetic_manifest(40, 21);
  const auto records = records_for(m, "hubert", "ft-1h", 22, true);
  const auto norm = textnorm::default_profile();
  const auto report = evaluate(records, m, norm);
  REQUIRE(report.rows.size() == 2);

  std::size_t edits_before = 0, edits_after = 0, ref_len = 0;
  double macro_before = 0.0, macro_after = 0.0;
  for (const auto& r : records) {
    const auto ref = textnorm::normalize(m.find(r.clip_id)->reference);
    const auto b = distance(ref, textnorm::normalize(r.hypothesis.text));
    const auto a = distance(ref, textnorm::normalize(r.corrected_text));
    edits_before += b;
    edits_after += a;
    ref_len += ref.size();
    macro_before += static_cast<double>(b) / static_cast<double>(ref.size());
    macro_after += static_cast<double>(a) / static_cast<double>(ref.size());
  }
  const auto& before = report.rows[0];
  const auto& after = report.rows[1];
  CHECK_FALSE(before.with_vpc);
  CHECK(after.with_vpc);
  CHECK(before.errors == edits_before);
  CHECK(after.errors == edits_after);
  CHECK(before.ref_len == ref_len);
  CHECK(before.pooled_wer == doctest::Approx(static_cast<double>(edits_before) / ref_len).epsilon(1e-12));
  CHECK(after.pooled_wer == doctest::Approx(static_cast<double>(edits_after) / ref_len).epsilon(1e-12));
  CHECK(before.macro_wer == doctest::Approx(macro_before / 40).epsilon(1e-12));
  CHECK(after.macro_wer == doctest::Approx(macro_after / 40).epsilon(1e-12));
  CHECK(after.pooled_wer < before.pooled_wer);
  CHECK(before.norm_profile == "default-v1");
}

TEST_CASE("rows cover every model and setting in canonical order") {
  const auto m = testing::synthetic_manifest(6, 2);
  std::vector<pipeline::CorrectionRecord> records;
  unsigned seed = 0;
  for (const char* setting : {"ft-72h", "no-ft", "ft-1h"}) {
    for (const char* asr : {"wavlm", "wav2vec2", "hubert"}) {
      ++seed;
      const auto part = records_for(m, asr, setting, seed, seed % 2 == 0);
      records.insert(records.end(), part.begin(), part.end());
    }
  }
  const auto report = evaluate(records, m, textnorm::default_profile());
  REQUIRE(report.rows.size() == 18);
  std::size_t i = 0;
  for (const char* asr : {"wav2vec2", "hubert", "wavlm"}) {
    for (const char* setting : {"no-ft", "ft-1h", "ft-72h"}) {
      for (const bool with_vpc : {false, true}) {
        CHECK(report.rows[i].asr_model == asr);
        CHECK(report.rows[i].setting == setting);
        CHECK(report.rows[i].with_vpc == with_vpc);
        CHECK(report.rows[i].clip_count == 6);
        ++i;
      }
    }
  }
  const auto table = format_table(report);
  CHECK(table.find("wav2vec2") < table.find("hubert"));
  CHECK(table.find("hubert") < table.find("wavlm"));
}

TEST_CASE("per-show figures recombine into the pooled figure") {
  const auto m = testing::synthetic_manifest(37, 4);
  const auto records = records_for(m, "wav2vec2", "no-ft", 5, true);
  const auto report = evaluate(records, m, textnorm::default_profile());
  for (const bool with_vpc : {false, true}) {
    std::size_t errors = 0, ref_len = 0, clips = 0;
    double weighted = 0.0;
    for (const auto& s : report.per_show) {
      if (s.with_vpc != with_vpc) continue;
      errors += s.errors;
      ref_len += s.ref_len;
      clips += s.clip_count;
      weighted += s.pooled_wer * static_cast<double>(s.ref_len);
    }
    const auto& row = report.rows[with_vpc ? 1 : 0];
    CHECK(clips == 37);
    CHECK(errors == row.errors);
    CHECK(std::abs(weighted / static_cast<double>(ref_len) - row.pooled_wer) <= 1e-12);
  }
}

TEST_CASE("report json is stable") {
  const auto m = testing::synthetic_manifest(15, 4);
  const auto records = records_for(m, "wav2vec2", "no-ft", 5, true);
  const auto a = report_to_json(evaluate(records, m, textnorm::default_profile())).dump(2);
  auto shuffled = records;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto b = report_to_json(evaluate(shuffled, m, textnorm::default_profile())).dump(2);
  CHECK(a == b);
  const auto j = nlohmann::json::parse(a);
  CHECK(j["schema_version"] == 1);
  CHECK(j["norm_profile"] == "default-v1");
  CHECK(j["headline_aggregation"] == "pooled");
  CHECK(j["per_clip"].size() == 15);
}

TEST_CASE("evaluation errors") {
  const auto m = testing::synthetic_manifest(3, 4);
  auto records = records_for(m, "wav2vec2", "no-ft", 5, false);
  SUBCASE("duplicate") {
    records.push_back(records[0]);
    CHECK_THROWS_AS(evaluate(records, m, textnorm::default_profile()), DuplicateRecord);
  }
  SUBCASE("unknown clip") {
    records[1].clip_id = "ghost";
    CHECK_THROWS_AS(evaluate(records, m, textnorm::default_profile()), MissingClip);
  }
  SUBCASE("empty reference") {
    auto blank = m;
    blank.clips[2].reference = "--";
    CHECK_THROWS_AS(evaluate(records, blank, textnorm::default_profile()), MissingReference);
  }
}

TEST_CASE("case diff for the beehive example") {
  const auto c = make_case("a be hi hat", "a beehive", "a beehive", textnorm::default_profile());
  CHECK(c.before_spans == std::vector<Span>{{1, 4, Span::Kind::kError}});
  CHECK(c.after_spans == std::vector<Span>{{1, 2, Span::Kind::kCorrected}});
  CHECK(c.wer_before == 1.5);
  CHECK(c.wer_after == 0.0);
  CHECK(format_case(c).find("a [-be hi hat-]") != std::string::npos);
  CHECK(format_case(c).find("a {+beehive+}") != std::string::npos);
}

TEST_CASE("case diff marks words that stay wrong") {
  const auto c = make_case("joey were is the copy", "where is the copy", "where is the coffee",
                           textnorm::default_profile());
  // before: insertion "joey", substitution were/where, substitution copy/coffee.
  CHECK(c.before_spans == std::vector<Span>{{0, 2, Span::Kind::kError}, {4, 5, Span::Kind::kError}});
  CHECK(c.after_spans == std::vector<Span>{{0, 1, Span::Kind::kCorrected}, {3, 4, Span::Kind::kError}});
}

TEST_CASE("diff_cases ranks by WER reduction") {
  corpus::Manifest m;
  for (const char* id : {"c1", "c2", "c3"}) {
    corpus::Clip c;
    c.id = id;
    c.show = "Friends";
    c.reference = "we were on a break";
    c.duration_s = 3.0;
    m.clips.push_back(c);
  }
  const auto rec = [](const char* id, const char* before, const char* after) {
    pipeline::CorrectionRecord r;
    r.clip_id = id;
    r.hypothesis = {id, "wavlm", "no-ft", before};
    r.corrected_text = after;
    return r;
  };
  const std::vector<pipeline::CorrectionRecord> records{
      rec("c1", "we were on a brake", "we were on a break"),
      rec("c2", "he was in a brake", "we were on a break"),
      rec("c3", "we were on a brake", "we were on a break"),
  };
  const auto cases = diff_cases(records, m, 2, textnorm::default_profile());
  REQUIRE(cases.size() == 2);
  CHECK(cases[0].clip_id == "c2");
  CHECK(cases[1].clip_id == "c1");
  CHECK(diff_cases(records, m, 0, textnorm::default_profile()).empty());
  CHECK(case_to_json(cases[0])["after_spans"][0]["kind"] == "corrected");
}
