#include "vpc/reporting.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

namespace vpc::reporting {

using nlohmann::json;

namespace {

// Conventional ordering for the models and settings that appear in the
// published comparison; anything else sorts after them alphabetically.
int rank_of(const std::string& value, std::initializer_list<const char*> known) {
  int i = 0;
  for (const char* k : known) {
    if (value == k) return i;
    ++i;
  }
  return i;
}

struct PairKey {
  std::string asr_model;
  std::string setting;

  auto tie() const {
    return std::make_tuple(rank_of(asr_model, {"wav2vec2", "hubert", "wavlm"}), asr_model,
                           rank_of(setting, {"no-ft", "ft-1h", "ft-72h"}), setting);
  }
  bool operator<(const PairKey& o) const { return tie() < o.tie(); }
};

struct Tally {
  std::size_t clips = 0;
  std::size_t errors = 0;
  std::size_t ref_len = 0;
  double wer_sum = 0.0;

  void add(const wer::WerStats& s) {
    ++clips;
    errors += s.errors();
    ref_len += s.ref_len;
    wer_sum += s.wer;
  }
  double pooled() const { return ref_len == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(ref_len); }
  double macro() const { return clips == 0 ? 0.0 : wer_sum / static_cast<double>(clips); }
};

json stats_json(const wer::WerStats& s) {
  return json{{"substitutions", s.substitutions},
              {"deletions", s.deletions},
              {"insertions", s.insertions},
              {"ref_len", s.ref_len},
              {"wer", s.wer}};
}

std::vector<Span> coalesce(const std::vector<std::pair<std::size_t, Span::Kind>>& marks) {
  std::vector<Span> spans;
  for (const auto& [index, kind] : marks) {
    if (!spans.empty() && spans.back().end == index && spans.back().kind == kind) {
      ++spans.back().end;
    } else {
      spans.push_back({index, index + 1, kind});
    }
  }
  return spans;
}

const corpus::Clip& scored_clip(const corpus::Manifest& manifest, const std::string& id,
                                const textnorm::NormConfig& norm, textnorm::TokenSeq& ref_tokens) {
  const corpus::Clip* clip = manifest.find(id);
  if (clip == nullptr) throw MissingClip(id);
  ref_tokens = textnorm::normalize(clip->reference, norm);
  if (ref_tokens.empty()) throw MissingReference(id);
  return *clip;
}

}  // namespace

EvalReport evaluate(const std::vector<pipeline::CorrectionRecord>& records, const corpus::Manifest& manifest,
                    const textnorm::NormConfig& norm) {
  EvalReport report;
  report.norm_profile = norm.profile;

  std::map<PairKey, std::pair<Tally, Tally>> pairs;
  std::map<std::tuple<PairKey, std::string>, std::pair<Tally, Tally>> shows;
  std::set<std::tuple<std::string, std::string, std::string>> seen;

  // Scored in a fixed order so floating-point sums do not depend on how the
  // records were gathered.
  std::vector<const pipeline::CorrectionRecord*> ordered;
  for (const auto& r : records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return std::tie(a->clip_id, a->hypothesis.asr_model, a->hypothesis.setting) <
           std::tie(b->clip_id, b->hypothesis.asr_model, b->hypothesis.setting);
  });

  for (const auto* rp : ordered) {
    const auto& r = *rp;
    if (!seen.emplace(r.clip_id, r.hypothesis.asr_model, r.hypothesis.setting).second) {
      throw DuplicateRecord("more than one record for clip '" + r.clip_id + "' under (" + r.hypothesis.asr_model +
                            ", " + r.hypothesis.setting + ")");
    }
    textnorm::TokenSeq ref;
    const corpus::Clip& clip = scored_clip(manifest, r.clip_id, norm, ref);
    ClipScore score;
    score.clip_id = r.clip_id;
    score.asr_model = r.hypothesis.asr_model;
    score.setting = r.hypothesis.setting;
    score.show = clip.show;
    score.fallback_used = r.fallback_used;
    score.before = wer::compute_wer(ref, textnorm::normalize(r.hypothesis.text, norm));
    score.after = wer::compute_wer(ref, textnorm::normalize(r.corrected_text, norm));

    const PairKey key{score.asr_model, score.setting};
    auto& pair = pairs[key];
    pair.first.add(score.before);
    pair.second.add(score.after);
    auto& show = shows[{key, clip.show}];
    show.first.add(score.before);
    show.second.add(score.after);
    report.clips.push_back(std::move(score));
  }

  for (const auto& [key, tallies] : pairs) {
    for (const bool with_vpc : {false, true}) {
      const Tally& t = with_vpc ? tallies.second : tallies.first;
      report.rows.push_back(
          {key.asr_model, key.setting, with_vpc, t.pooled(), t.macro(), t.clips, t.errors, t.ref_len, norm.profile});
    }
  }
  for (const auto& [key, tallies] : shows) {
    const auto& [pair, show] = key;
    for (const bool with_vpc : {false, true}) {
      const Tally& t = with_vpc ? tallies.second : tallies.first;
      report.per_show.push_back({pair.asr_model, pair.setting, with_vpc, show, t.pooled(), t.clips, t.errors, t.ref_len});
    }
  }
  std::sort(report.clips.begin(), report.clips.end(), [](const ClipScore& a, const ClipScore& b) {
    return std::tie(a.clip_id, a.asr_model, a.setting) < std::tie(b.clip_id, b.asr_model, b.setting);
  });
  return report;
}

json report_to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"asr_model", r.asr_model},
                    {"setting", r.setting},
                    {"with_vpc", r.with_vpc},
                    {"pooled_wer", r.pooled_wer},
                    {"macro_wer", r.macro_wer},
                    {"clip_count", r.clip_count},
                    {"errors", r.errors},
                    {"ref_len", r.ref_len},
                    {"norm_profile", r.norm_profile}});
  }
  json per_show = json::array();
  for (const auto& s : report.per_show) {
    per_show.push_back({{"asr_model", s.asr_model},
                        {"setting", s.setting},
                        {"with_vpc", s.with_vpc},
                        {"show", s.show},
                        {"pooled_wer", s.pooled_wer},
                        {"clip_count", s.clip_count},
                        {"errors", s.errors},
                        {"ref_len", s.ref_len}});
  }
  json clips = json::array();
  for (const auto& c : report.clips) {
    clips.push_back({{"clip_id", c.clip_id},
                     {"asr_model", c.asr_model},
                     {"setting", c.setting},
                     {"show", c.show},
                     {"fallback_used", c.fallback_used},
                     {"before", stats_json(c.before)},
                     {"after", stats_json(c.after)}});
  }
  return json{{"schema_version", 1},
              {"norm_profile", report.norm_profile},
              {"headline_aggregation", "pooled"},
              {"rows", std::move(rows)},
              {"per_show", std::move(per_show)},
              {"per_clip", std::move(clips)}};
}

std::string format_table(const EvalReport& report) {
  std::string out = fmt::format("normalization: {}   (pooled = total edits / total reference words)\n",
                                report.norm_profile);
  out += fmt::format("{:<12} {:<10} {:<6} {:>8} {:>8} {:>7} {:>9}\n", "model", "setting", "w/VPC", "pooled%",
                     "macro%", "clips", "ref_words");
  out += std::string(66, '-') + '\n';
  for (const auto& r : report.rows) {
    out += fmt::format("{:<12} {:<10} {:<6} {:>8.2f} {:>8.2f} {:>7} {:>9}\n", r.asr_model, r.setting,
                       r.with_vpc ? "yes" : "no", 100.0 * r.pooled_wer, 100.0 * r.macro_wer, r.clip_count,
                       r.ref_len);
  }
  if (!report.per_show.empty()) {
    out += "\nper show (pooled %)\n";
    for (const auto& s : report.per_show) {
      out += fmt::format("{:<12} {:<10} {:<6} {:<24} {:>8.2f} {:>7}\n", s.asr_model, s.setting,
                         s.with_vpc ? "yes" : "no", s.show, 100.0 * s.pooled_wer, s.clip_count);
    }
  }
  return out;
}

CaseDiff make_case(const std::string& before, const std::string& after, const std::string& reference,
                   const textnorm::NormConfig& norm) {
  CaseDiff c;
  c.before = before;
  c.after = after;
  c.reference = reference;
  c.before_tokens = textnorm::normalize(before, norm);
  c.after_tokens = textnorm::normalize(after, norm);
  c.reference_tokens = textnorm::normalize(reference, norm);

  const wer::Alignment before_align = wer::align(c.reference_tokens, c.before_tokens);
  const wer::Alignment after_align = wer::align(c.reference_tokens, c.after_tokens);
  c.wer_before = wer::wer_from_alignment(before_align).wer;
  c.wer_after = wer::wer_from_alignment(after_align).wer;

  std::set<std::size_t> wrong_ref;
  std::vector<std::pair<std::size_t, Span::Kind>> marks;
  std::size_t r = 0;
  std::size_t h = 0;
  for (const auto& step : before_align.steps) {
    switch (step.op) {
      case wer::EditOp::kMatch:
        ++r;
        ++h;
        break;
      case wer::EditOp::kSubstitute:
        wrong_ref.insert(r++);
        marks.emplace_back(h++, Span::Kind::kError);
        break;
      case wer::EditOp::kDelete:
        wrong_ref.insert(r++);
        break;
      case wer::EditOp::kInsert:
        marks.emplace_back(h++, Span::Kind::kError);
        break;
    }
  }
  c.before_spans = coalesce(marks);

  marks.clear();
  r = 0;
  h = 0;
  for (const auto& step : after_align.steps) {
    switch (step.op) {
      case wer::EditOp::kMatch:
        if (wrong_ref.contains(r)) marks.emplace_back(h, Span::Kind::kCorrected);
        ++r;
        ++h;
        break;
      case wer::EditOp::kSubstitute:
        marks.emplace_back(h++, Span::Kind::kError);
        ++r;
        break;
      case wer::EditOp::kDelete:
        ++r;
        break;
      case wer::EditOp::kInsert:
        marks.emplace_back(h++, Span::Kind::kError);
        break;
    }
  }
  c.after_spans = coalesce(marks);
  return c;
}

std::vector<CaseDiff> diff_cases(const std::vector<pipeline::CorrectionRecord>& records,
                                 const corpus::Manifest& manifest, std::size_t k, const textnorm::NormConfig& norm) {
  std::vector<CaseDiff> cases;
  if (k == 0) return cases;
  for (const auto& rec : records) {
    textnorm::TokenSeq ref;
    const corpus::Clip& clip = scored_clip(manifest, rec.clip_id, norm, ref);
    CaseDiff c = make_case(rec.hypothesis.text, rec.corrected_text, clip.reference, norm);
    c.clip_id = rec.clip_id;
    c.asr_model = rec.hypothesis.asr_model;
    c.setting = rec.hypothesis.setting;
    cases.push_back(std::move(c));
  }
  std::stable_sort(cases.begin(), cases.end(), [](const CaseDiff& a, const CaseDiff& b) {
    const double da = a.wer_before - a.wer_after;
    const double db = b.wer_before - b.wer_after;
    if (da != db) return da > db;
    return std::tie(a.clip_id, a.asr_model, a.setting) < std::tie(b.clip_id, b.asr_model, b.setting);
  });
  if (cases.size() > k) cases.resize(k);
  return cases;
}

json case_to_json(const CaseDiff& c) {
  const auto spans = [](const std::vector<Span>& v) {
    json out = json::array();
    for (const auto& s : v) {
      out.push_back({{"begin", s.begin}, {"end", s.end}, {"kind", s.kind == Span::Kind::kError ? "error" : "corrected"}});
    }
    return out;
  };
  return json{{"clip_id", c.clip_id},
              {"asr_model", c.asr_model},
              {"setting", c.setting},
              {"before", c.before},
              {"after", c.after},
              {"reference", c.reference},
              {"before_spans", spans(c.before_spans)},
              {"after_spans", spans(c.after_spans)},
              {"wer_before", c.wer_before},
              {"wer_after", c.wer_after}};
}

namespace {

std::string highlight(const textnorm::TokenSeq& tokens, const std::vector<Span>& spans) {
  std::string out;
  std::size_t next = 0;
  const auto emit = [&](std::string_view piece) {
    if (!out.empty()) out.push_back(' ');
    out += piece;
  };
  for (const auto& s : spans) {
    for (; next < s.begin; ++next) emit(tokens[next]);
    std::string inner;
    for (std::size_t i = s.begin; i < s.end; ++i) inner += (i == s.begin ? "" : " ") + tokens[i];
    emit(s.kind == Span::Kind::kError ? "[-" + inner + "-]" : "{+" + inner + "+}");
    next = s.end;
  }
  for (; next < tokens.size(); ++next) emit(tokens[next]);
  return out;
}

}  // namespace

std::string format_case(const CaseDiff& c) {
  std::string out = fmt::format("clip {} ({}, {})  WER {:.2f}% -> {:.2f}%\n", c.clip_id, c.asr_model, c.setting,
                                100.0 * c.wer_before, 100.0 * c.wer_after);
  out += "  reference: " + textnorm::join(c.reference_tokens) + '\n';
  out += "  before:    " + highlight(c.before_tokens, c.before_spans) + '\n';
  out += "  after:     " + highlight(c.after_tokens, c.after_spans) + '\n';
  return out;
}

}  // namespace vpc::reporting
