#include "vpc/wer.hpp"

#include <algorithm>
#include <span>
#include <unordered_map>

namespace vpc::wer {

const char* to_string(EditOp op) {
  switch (op) {
    case EditOp::kMatch:
      return "match";
    case EditOp::kSubstitute:
      return "sub";
    case EditOp::kInsert:
      return "ins";
    case EditOp::kDelete:
      return "del";
  }
  return "?";
}

std::size_t Alignment::cost() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(), [](const EditStep& s) { return s.op != EditOp::kMatch; }));
}

TokenSeq Alignment::ref_tokens() const {
  TokenSeq out;
  for (const auto& s : steps) {
    if (s.op != EditOp::kInsert) out.push_back(s.ref);
  }
  return out;
}

TokenSeq Alignment::hyp_tokens() const {
  TokenSeq out;
  for (const auto& s : steps) {
    if (s.op != EditOp::kDelete) out.push_back(s.hyp);
  }
  return out;
}

Alignment align(const TokenSeq& ref, const TokenSeq& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  const std::size_t width = m + 1;
  // dist[i][j] = edit distance between ref[i:] and hyp[j:]. Working on
  // suffixes lets the trace walk forward so ties resolve in reading order.
  std::vector<std::size_t> dist((n + 1) * width);
  const auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * width + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, m) = n - i;
  for (std::size_t j = 0; j <= m; ++j) at(n, j) = m - j;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      const std::size_t diag = at(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
      at(i, j) = std::min({diag, at(i + 1, j) + 1, at(i, j + 1) + 1});
    }
  }

  Alignment a;
  a.steps.reserve(n + m);
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n || j < m) {
    const std::size_t here = at(i, j);
    if (i < n && j < m) {
      const bool same = ref[i] == hyp[j];
      if (at(i + 1, j + 1) + (same ? 0 : 1) == here) {
        a.steps.push_back({same ? EditOp::kMatch : EditOp::kSubstitute, ref[i], hyp[j]});
        ++i;
        ++j;
        continue;
      }
    }
    if (i < n && at(i + 1, j) + 1 == here) {
      a.steps.push_back({EditOp::kDelete, ref[i], {}});
      ++i;
      continue;
    }
    a.steps.push_back({EditOp::kInsert, {}, hyp[j]});
    ++j;
  }
  return a;
}

WerStats wer_from_alignment(const Alignment& a) {
  WerStats s;
  std::size_t hyp_len = 0;
  for (const auto& step : a.steps) {
    switch (step.op) {
      case EditOp::kMatch:
        ++s.ref_len;
        ++hyp_len;
        break;
      case EditOp::kSubstitute:
        ++s.substitutions;
        ++s.ref_len;
        ++hyp_len;
        break;
      case EditOp::kDelete:
        ++s.deletions;
        ++s.ref_len;
        break;
      case EditOp::kInsert:
        ++s.insertions;
        ++hyp_len;
        break;
    }
  }
  if (s.ref_len == 0) {
    if (hyp_len > 0) throw EmptyReference();
    s.degenerate = true;
    s.wer = 0.0;
    return s;
  }
  s.wer = static_cast<double>(s.errors()) / static_cast<double>(s.ref_len);
  return s;
}

WerStats compute_wer(const TokenSeq& ref, const TokenSeq& hyp) { return wer_from_alignment(align(ref, hyp)); }

CorpusWer aggregate(const std::map<std::string, WerStats>& per_clip) {
  if (per_clip.empty()) throw EmptyCorpus();
  CorpusWer c;
  c.per_clip = per_clip;
  double wer_sum = 0.0;
  for (const auto& [id, s] : per_clip) {
    c.total_errors += s.errors();
    c.total_ref_len += s.ref_len;
    wer_sum += s.wer;
  }
  c.pooled_wer =
      c.total_ref_len == 0 ? 0.0 : static_cast<double>(c.total_errors) / static_cast<double>(c.total_ref_len);
  c.macro_wer = wer_sum / static_cast<double>(per_clip.size());
  return c;
}

namespace {

using Ids = std::span<const int>;

void search(Ids ref, Ids hyp, std::size_t spent, std::size_t& best) {
  const std::size_t gap = ref.size() > hyp.size() ? ref.size() - hyp.size() : hyp.size() - ref.size();
  if (spent + gap >= best) return;
  if (ref.empty() || hyp.empty()) {
    best = spent + gap;
    return;
  }
  search(ref.subspan(1), hyp.subspan(1), spent + (ref[0] == hyp[0] ? 0 : 1), best);
  search(ref.subspan(1), hyp, spent + 1, best);
  search(ref, hyp.subspan(1), spent + 1, best);
}

}  // namespace

std::size_t brute_force_distance(const TokenSeq& ref, const TokenSeq& hyp) {
  if (ref.size() > kBruteForceMaxLen || hyp.size() > kBruteForceMaxLen) throw InputTooLarge();
  std::unordered_map<std::string, int> vocab;
  const auto intern = [&](const TokenSeq& seq) {
    std::vector<int> ids;
    for (const auto& t : seq) ids.push_back(vocab.emplace(t, static_cast<int>(vocab.size())).first->second);
    return ids;
  };
  const std::vector<int> r = intern(ref);
  const std::vector<int> h = intern(hyp);
  std::size_t best = std::max(r.size(), h.size()) + 1;
  search(r, h, 0, best);
  return best;
}

}  // namespace vpc::wer
