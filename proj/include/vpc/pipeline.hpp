#pragma once

#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vpc/corpus.hpp"
#include "vpc/error.hpp"
#include "vpc/frames.hpp"
#include "vpc/model_client.hpp"
#include "vpc/prompting.hpp"

namespace vpc::pipeline {

// An ASR transcript of one clip produced by a named model and setting.
struct Hypothesis {
  std::string clip_id;
  std::string asr_model;  // e.g. wav2vec2, hubert, wavlm
  std::string setting;    // e.g. no-ft, ft-1h, ft-72h
  std::string text;

  bool operator==(const Hypothesis&) const = default;
};

nlohmann::json hypothesis_to_json(const Hypothesis& h);
Hypothesis hypothesis_from_json(const nlohmann::json& j);

class DuplicateHypothesis : public Error {
 public:
  DuplicateHypothesis(const std::string& clip_id, const std::string& asr_model, const std::string& setting)
      : Error("duplicate hypothesis for (" + clip_id + ", " + asr_model + ", " + setting + ")") {}
};

class MalformedHypothesis : public Error {
 public:
  MalformedHypothesis(std::size_t line, const std::string& detail)
      : Error("malformed hypothesis at line " + std::to_string(line) + ": " + detail), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Hypotheses keyed by (clip_id, asr_model, setting).
class HypothesisSet {
 public:
  void add(Hypothesis h);
  const Hypothesis* find(std::string_view clip_id, std::string_view asr_model, std::string_view setting) const;
  const std::vector<Hypothesis>& all() const { return items_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<Hypothesis> items_;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index_;
};

HypothesisSet parse_hypotheses(std::istream& in);
HypothesisSet load_hypotheses(const std::string& path);
void write_hypotheses(const std::vector<Hypothesis>& hyps, std::ostream& out);

enum class MediaMode { kFrames, kVideoUrl };
const char* to_string(MediaMode mode);
MediaMode parse_media_mode(std::string_view s);

// The two context texts extracted from a clip's video, with provenance.
struct ContextBundle {
  std::string clip_id;
  std::string c1_show;
  std::string c2_description;
  std::string vlmm_model;
  std::string p1_hash;
  std::string p2_hash;
  MediaMode media_mode = MediaMode::kFrames;
  int frame_count = 0;

  bool operator==(const ContextBundle&) const = default;
};

nlohmann::json bundle_to_json(const ContextBundle& b);
ContextBundle bundle_from_json(const nlohmann::json& j);

struct CorrectionRecord {
  std::string clip_id;
  Hypothesis hypothesis;
  std::string corrected_text;
  ContextBundle context;
  std::string llm_model;
  std::string t_hash;
  bool fallback_used = false;
  std::string raw_llm_output;

  bool operator==(const CorrectionRecord&) const = default;
};

nlohmann::json record_to_json(const CorrectionRecord& r);
CorrectionRecord record_from_json(const nlohmann::json& j);

struct PipelineConfig {
  std::string vlmm_endpoint;
  std::string llm_endpoint;
  std::string vlmm_model = "VideoLLaMA2";
  std::string llm_model = "gpt-4o";
  MediaMode media_mode = MediaMode::kFrames;
  int frame_count = 8;
  model::ExtractorCommand extractor;
  double temperature = 0.0;
  int max_tokens = model::kDefaultMaxTokens;
  prompting::TemplateSet templates = prompting::resolve_templates(std::nullopt);
  std::optional<std::string> prompt_dir;  // provenance only
  int workers = 4;
  std::string asr_model;
  std::string setting;
};

class ClipMismatch : public Error {
 public:
  ClipMismatch(const std::string& hyp_clip, const std::string& ctx_clip)
      : Error("hypothesis clip '" + hyp_clip + "' does not match context clip '" + ctx_clip + "'") {}
};

class MissingHypothesis : public Error {
 public:
  explicit MissingHypothesis(std::string clip_id)
      : Error("no hypothesis for clip '" + clip_id + "'"), clip_id_(std::move(clip_id)) {}
  const std::string& clip_id() const { return clip_id_; }

 private:
  std::string clip_id_;
};

class RunDirMismatch : public Error {
 public:
  using Error::Error;
};

// Asks the VLMM the show-recognition and description questions about the
// clip's video. The two calls run concurrently; either failing fails the clip.
ContextBundle extract_context(const corpus::Clip& clip, const PipelineConfig& cfg, model::ChatClient& vlmm);

// Pulls the transcript out of a corrector reply: strips code fences, a
// leading "Corrected transcript:"-style label and surrounding quotes.
// nullopt when nothing usable remains.
std::optional<std::string> parse_correction(std::string_view raw);

// Renders the correction instruction and asks the LLM. Unusable replies keep
// the hypothesis and set fallback_used.
CorrectionRecord correct(const Hypothesis& h, const ContextBundle& ctx, const PipelineConfig& cfg,
                         model::ChatClient& llm);

// Files inside a run directory.
inline constexpr const char* kRunJson = "run.json";
inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kFailuresFile = "failures.jsonl";

// Records in file order. Unparseable lines (e.g. a write cut short by a
// crash) are skipped.
std::vector<CorrectionRecord> load_records(const std::string& run_dir);

struct RunOptions {
  std::string run_dir;
  // Precomputed contexts by clip id; when set, the VLMM stage is skipped for
  // the clips it covers.
  const std::map<std::string, ContextBundle>* contexts = nullptr;
  // Called after each record has been persisted.
  std::function<void(const CorrectionRecord&)> on_record;
  // Copied into run.json.
  nlohmann::json effective_config = nlohmann::json::object();
};

struct RunSummary {
  std::size_t clips = 0;
  std::size_t skipped = 0;  // already recorded by an earlier invocation
  std::size_t processed = 0;
  std::size_t failed = 0;
};

// Corrects every clip of `split`, resuming from whatever the run directory
// already holds. Per-clip model failures go to failures.jsonl and do not stop
// the run. records.jsonl is rewritten in manifest order when the run ends.
RunSummary run(const corpus::Manifest& manifest, corpus::Split split, const HypothesisSet& hyps,
               const PipelineConfig& cfg, model::ChatClient& vlmm, model::ChatClient& llm, const RunOptions& opts);

struct ContextFailure {
  std::string clip_id;
  std::string error;
};

// Context stage alone, over a split, with bounded parallelism. Results are in
// manifest order.
std::vector<ContextBundle> extract_contexts(const corpus::Manifest& manifest, corpus::Split split,
                                            const PipelineConfig& cfg, model::ChatClient& vlmm,
                                            std::vector<ContextFailure>& failures);

// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace vpc::pipeline
