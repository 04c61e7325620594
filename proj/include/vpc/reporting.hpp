#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "vpc/corpus.hpp"
#include "vpc/error.hpp"
#include "vpc/pipeline.hpp"
#include "vpc/textnorm.hpp"
#include "vpc/wer.hpp"

namespace vpc::reporting {

// One line of the before/after comparison. Each (asr_model, setting) pair
// yields two rows: without and with correction.
struct EvalRow {
  std::string asr_model;
  std::string setting;
  bool with_vpc = false;
  double pooled_wer = 0.0;
  double macro_wer = 0.0;
  std::size_t clip_count = 0;
  std::size_t errors = 0;
  std::size_t ref_len = 0;
  std::string norm_profile;
};

struct ShowRow {
  std::string asr_model;
  std::string setting;
  bool with_vpc = false;
  std::string show;
  double pooled_wer = 0.0;
  std::size_t clip_count = 0;
  std::size_t errors = 0;
  std::size_t ref_len = 0;
};

struct ClipScore {
  std::string clip_id;
  std::string asr_model;
  std::string setting;
  std::string show;
  bool fallback_used = false;
  wer::WerStats before;
  wer::WerStats after;
};

struct EvalReport {
  std::string norm_profile;
  std::vector<EvalRow> rows;
  std::vector<ShowRow> per_show;
  std::vector<ClipScore> clips;
};

class MissingClip : public Error {
 public:
  explicit MissingClip(const std::string& id) : Error("record refers to clip '" + id + "' absent from manifest") {}
};

class MissingReference : public Error {
 public:
  explicit MissingReference(const std::string& id)
      : Error("clip '" + id + "' has an empty reference after normalization") {}
};

class DuplicateRecord : public Error {
 public:
  using Error::Error;
};

// Scores hypotheses (before) and corrected texts (after) against the
// manifest references.
EvalReport evaluate(const std::vector<pipeline::CorrectionRecord>& records, const corpus::Manifest& manifest,
                    const textnorm::NormConfig& norm);

nlohmann::json report_to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

struct Span {
  enum class Kind { kError, kCorrected };
  std::size_t begin = 0;  // token index, inclusive
  std::size_t end = 0;    // exclusive
  Kind kind = Kind::kError;

  bool operator==(const Span&) const = default;
};

struct CaseDiff {
  std::string clip_id;
  std::string asr_model;
  std::string setting;
  std::string before;
  std::string after;
  std::string reference;
  textnorm::TokenSeq before_tokens;
  textnorm::TokenSeq after_tokens;
  textnorm::TokenSeq reference_tokens;
  // Error spans index before_tokens. In after_spans, kError marks words that
  // are still wrong and kCorrected marks words that now match a reference
  // word the hypothesis got wrong.
  std::vector<Span> before_spans;
  std::vector<Span> after_spans;
  double wer_before = 0.0;
  double wer_after = 0.0;
};

CaseDiff make_case(const std::string& before, const std::string& after, const std::string& reference,
                   const textnorm::NormConfig& norm);

// Top-k clips by WER reduction, largest first; ties broken by clip id.
std::vector<CaseDiff> diff_cases(const std::vector<pipeline::CorrectionRecord>& records,
                                 const corpus::Manifest& manifest, std::size_t k, const textnorm::NormConfig& norm);

nlohmann::json case_to_json(const CaseDiff& c);
// Errors render as [-...-], corrections as {+...+}.
std::string format_case(const CaseDiff& c);

}  // namespace vpc::reporting
