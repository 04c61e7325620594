#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "vpc/error.hpp"
#include "vpc/textnorm.hpp"

namespace vpc::wer {

using textnorm::TokenSeq;

enum class EditOp { kMatch, kSubstitute, kInsert, kDelete };

const char* to_string(EditOp op);

// ref is empty for kInsert, hyp is empty for kDelete.
struct EditStep {
  EditOp op;
  std::string ref;
  std::string hyp;

  bool operator==(const EditStep&) const = default;
};

struct Alignment {
  std::vector<EditStep> steps;

  std::size_t cost() const;
  TokenSeq ref_tokens() const;
  TokenSeq hyp_tokens() const;
  bool operator==(const Alignment&) const = default;
};

// Minimal unit-cost alignment. Among optimal alignments the one chosen is the
// first in reading order under the preference Match > Substitute > Delete >
// Insert, so "a beehive" vs "a be hi hat" substitutes at "be" and inserts
// "hi hat" after it.
Alignment align(const TokenSeq& ref, const TokenSeq& hyp);

struct WerStats {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;
  double wer = 0.0;
  // Both sides empty: wer is reported as 0 with ref_len 0.
  bool degenerate = false;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  bool operator==(const WerStats&) const = default;
};

class EmptyReference : public Error {
 public:
  EmptyReference() : Error("reference is empty but hypothesis is not; WER undefined") {}
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("cannot aggregate WER over an empty corpus") {}
};

class InputTooLarge : public Error {
 public:
  InputTooLarge() : Error("brute-force distance is limited to sequences of at most 7 tokens") {}
};

WerStats wer_from_alignment(const Alignment& a);
WerStats compute_wer(const TokenSeq& ref, const TokenSeq& hyp);

struct CorpusWer {
  double pooled_wer = 0.0;  // sum of edits / sum of ref_len
  double macro_wer = 0.0;   // unweighted mean of per-clip wer
  std::size_t total_errors = 0;
  std::size_t total_ref_len = 0;
  std::map<std::string, WerStats> per_clip;
};

CorpusWer aggregate(const std::map<std::string, WerStats>& per_clip);

inline constexpr std::size_t kBruteForceMaxLen = 7;

// Exhaustive search over edit scripts; no dynamic programming table. Branches
// that cannot beat the best complete script found so far are cut using the
// length-difference lower bound. Verification only.
std::size_t brute_force_distance(const TokenSeq& ref, const TokenSeq& hyp);

}  // namespace vpc::wer
