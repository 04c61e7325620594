#include "vpc/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace vpc::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Hypotheses

json hypothesis_to_json(const Hypothesis& h) {
  return json{{"clip_id", h.clip_id}, {"asr_model", h.asr_model}, {"setting", h.setting}, {"text", h.text}};
}

Hypothesis hypothesis_from_json(const json& j) {
  return Hypothesis{j.at("clip_id").get<std::string>(), j.at("asr_model").get<std::string>(),
                    j.at("setting").get<std::string>(), j.at("text").get<std::string>()};
}

void HypothesisSet::add(Hypothesis h) {
  auto key = std::make_tuple(h.clip_id, h.asr_model, h.setting);
  if (index_.contains(key)) throw DuplicateHypothesis(h.clip_id, h.asr_model, h.setting);
  index_.emplace(std::move(key), items_.size());
  items_.push_back(std::move(h));
}

const Hypothesis* HypothesisSet::find(std::string_view clip_id, std::string_view asr_model,
                                      std::string_view setting) const {
  const auto it = index_.find(std::make_tuple(std::string(clip_id), std::string(asr_model), std::string(setting)));
  return it == index_.end() ? nullptr : &items_[it->second];
}

HypothesisSet parse_hypotheses(std::istream& in) {
  HypothesisSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Hypothesis h;
    try {
      h = hypothesis_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw MalformedHypothesis(line_no, e.what());
    }
    set.add(std::move(h));
  }
  return set;
}

HypothesisSet load_hypotheses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open hypothesis file '" + path + "'");
  return parse_hypotheses(in);
}

void write_hypotheses(const std::vector<Hypothesis>& hyps, std::ostream& out) {
  for (const auto& h : hyps) out << hypothesis_to_json(h).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Bundles and records

const char* to_string(MediaMode mode) { return mode == MediaMode::kFrames ? "frames" : "video-url"; }

MediaMode parse_media_mode(std::string_view s) {
  if (s == "frames") return MediaMode::kFrames;
  if (s == "video-url") return MediaMode::kVideoUrl;
  throw Error("media mode must be 'frames' or 'video-url' (got '" + std::string(s) + "')");
}

json bundle_to_json(const ContextBundle& b) {
  return json{{"clip_id", b.clip_id},
              {"c1_show", b.c1_show},
              {"c2_description", b.c2_description},
              {"vlmm_model", b.vlmm_model},
              {"p1_hash", b.p1_hash},
              {"p2_hash", b.p2_hash},
              {"media_mode", to_string(b.media_mode)},
              {"frame_count", b.frame_count}};
}

ContextBundle bundle_from_json(const json& j) {
  ContextBundle b;
  b.clip_id = j.at("clip_id").get<std::string>();
  b.c1_show = j.at("c1_show").get<std::string>();
  b.c2_description = j.at("c2_description").get<std::string>();
  b.vlmm_model = j.at("vlmm_model").get<std::string>();
  b.p1_hash = j.at("p1_hash").get<std::string>();
  b.p2_hash = j.at("p2_hash").get<std::string>();
  b.media_mode = parse_media_mode(j.at("media_mode").get<std::string>());
  b.frame_count = j.at("frame_count").get<int>();
  return b;
}

json record_to_json(const CorrectionRecord& r) {
  return json{{"clip_id", r.clip_id},
              {"hypothesis", hypothesis_to_json(r.hypothesis)},
              {"corrected_text", r.corrected_text},
              {"context", bundle_to_json(r.context)},
              {"llm_model", r.llm_model},
              {"t_hash", r.t_hash},
              {"fallback_used", r.fallback_used},
              {"raw_llm_output", r.raw_llm_output}};
}

CorrectionRecord record_from_json(const json& j) {
  CorrectionRecord r;
  r.clip_id = j.at("clip_id").get<std::string>();
  r.hypothesis = hypothesis_from_json(j.at("hypothesis"));
  r.corrected_text = j.at("corrected_text").get<std::string>();
  r.context = bundle_from_json(j.at("context"));
  r.llm_model = j.at("llm_model").get<std::string>();
  r.t_hash = j.at("t_hash").get<std::string>();
  r.fallback_used = j.at("fallback_used").get<bool>();
  r.raw_llm_output = j.at("raw_llm_output").get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

model::ChatRequest vlmm_request(const corpus::Clip& clip, const PipelineConfig& cfg,
                                const prompting::PromptTemplate& tpl,
                                const std::vector<model::ContentPart>& evidence) {
  model::ChatRequest req;
  req.kind = model::EndpointKind::kVlmm;
  req.endpoint = cfg.vlmm_endpoint;
  req.model_id = cfg.vlmm_model;
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;
  req.template_hash = tpl.content_hash();
  req.meta.clip_id = clip.id;
  req.meta.template_id = tpl.id();
  model::Message msg;
  msg.role = model::Role::kUser;
  msg.parts = evidence;
  msg.parts.emplace_back(model::TextPart{prompting::render(tpl, {})});
  req.messages.push_back(std::move(msg));
  return req;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool strip_wrapping(std::string& s, std::string_view open, std::string_view close) {
  if (s.size() >= open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
      s.compare(s.size() - close.size(), close.size(), close) == 0) {
    s = trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
    return true;
  }
  return false;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ContextBundle extract_context(const corpus::Clip& clip, const PipelineConfig& cfg, model::ChatClient& vlmm) {
  std::vector<model::ContentPart> evidence;
  int frame_count = 0;
  if (cfg.media_mode == MediaMode::kFrames) {
    for (auto& frame : model::sample_frames(clip.video_ref, clip.duration_s, cfg.frame_count, cfg.extractor)) {
      evidence.emplace_back(std::move(frame));
    }
    frame_count = cfg.frame_count;
  } else {
    if (clip.video_ref.empty()) throw model::UnsupportedMedia("clip '" + clip.id + "' has no video locator");
    evidence.emplace_back(model::VideoUrlPart{clip.video_ref});
  }

  const model::ChatRequest p1 = vlmm_request(clip, cfg, cfg.templates.show_recognition, evidence);
  const model::ChatRequest p2 = vlmm_request(clip, cfg, cfg.templates.description, evidence);
  auto show = std::async(std::launch::async, [&] { return vlmm.chat(p1); });
  model::ChatResponse description = vlmm.chat(p2);
  model::ChatResponse show_resp = show.get();

  ContextBundle b;
  b.clip_id = clip.id;
  b.c1_show = trim(show_resp.text);
  b.c2_description = trim(description.text);
  b.vlmm_model = cfg.vlmm_model;
  b.p1_hash = cfg.templates.show_recognition.content_hash();
  b.p2_hash = cfg.templates.description.content_hash();
  b.media_mode = cfg.media_mode;
  b.frame_count = frame_count;
  if (b.c1_show.empty() || b.c2_description.empty()) throw model::EmptyCompletion();
  return b;
}

std::optional<std::string> parse_correction(std::string_view raw) {
  std::string text = trim(raw);

  if (const auto fence = text.find("```"); fence != std::string::npos) {
    std::size_t body = text.find('\n', fence);
    body = body == std::string::npos ? text.size() : body + 1;
    const auto close = text.find("```", body);
    text = trim(std::string_view(text).substr(body, close == std::string::npos ? std::string::npos : close - body));
  }

  static const std::regex kLabel(
      R"(^\**\s*(?:the\s+)?(?:final\s+)?(?:corrected(?:\s+asr)?\s+(?:transcript|transcription|text|version)|corrected|correction|transcript|transcription|output|answer)\s*\**\s*:\s*\**)",
      std::regex::icase);
  std::smatch m;
  if (std::regex_search(text, m, kLabel)) text = trim(std::string_view(text).substr(m.length(0)));

  for (int pass = 0; pass < 2; ++pass) {
    const bool stripped = strip_wrapping(text, "\"", "\"") || strip_wrapping(text, "“", "”") ||
                          strip_wrapping(text, "'", "'") || strip_wrapping(text, "‘", "’") ||
                          strip_wrapping(text, "`", "`");
    if (!stripped) break;
  }

  if (text.empty()) return std::nullopt;
  return text;
}

CorrectionRecord correct(const Hypothesis& h, const ContextBundle& ctx, const PipelineConfig& cfg,
                         model::ChatClient& llm) {
  if (h.clip_id != ctx.clip_id) throw ClipMismatch(h.clip_id, ctx.clip_id);
  const prompting::PromptTemplate& tpl = cfg.templates.correction;
  const prompting::Vars vars{{"hypothesis", h.text}, {"context1", ctx.c1_show}, {"context2", ctx.c2_description}};

  model::ChatRequest req;
  req.kind = model::EndpointKind::kLlm;
  req.endpoint = cfg.llm_endpoint;
  req.model_id = cfg.llm_model;
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;
  req.template_hash = tpl.content_hash();
  req.meta = {h.clip_id, tpl.id(), vars};
  req.messages.push_back({model::Role::kUser, {model::TextPart{prompting::render(tpl, vars)}}});

  CorrectionRecord r;
  r.clip_id = h.clip_id;
  r.hypothesis = h;
  r.context = ctx;
  r.llm_model = cfg.llm_model;
  r.t_hash = tpl.content_hash();
  try {
    r.raw_llm_output = llm.chat(req).text;
  } catch (const model::EmptyCompletion&) {
    r.raw_llm_output.clear();
  }
  if (auto parsed = parse_correction(r.raw_llm_output)) {
    r.corrected_text = std::move(*parsed);
  } else {
    r.fallback_used = true;
    r.corrected_text = h.text;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Run directory

namespace {

std::vector<CorrectionRecord> read_records(const fs::path& path) {
  std::vector<CorrectionRecord> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception&) {
      // Partial line from an interrupted write; the clip is redone.
    }
  }
  return out;
}

void write_file_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Appends whole lines with a single write(2) on an O_APPEND descriptor.
class AppendFile {
 public:
  AppendFile(const fs::path& path, bool truncate) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC | (truncate ? O_TRUNC : 0), 0644);
    if (fd_ < 0) throw Error("cannot open " + path.string() + " for appending");
  }
  ~AppendFile() {
    if (fd_ >= 0) ::close(fd_);
  }
  AppendFile(const AppendFile&) = delete;
  AppendFile& operator=(const AppendFile&) = delete;

  void append_line(const std::string& line) {
    const std::string data = line + '\n';
    std::lock_guard lock(mu_);
    std::size_t written = 0;
    while (written < data.size()) {
      const ssize_t n = ::write(fd_, data.data() + written, data.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error("append failed");
      }
      written += static_cast<std::size_t>(n);
    }
  }

 private:
  int fd_ = -1;
  std::mutex mu_;
};

std::string records_text(std::vector<CorrectionRecord> records,
                         const std::unordered_map<std::string, std::size_t>& order) {
  std::stable_sort(records.begin(), records.end(), [&](const CorrectionRecord& a, const CorrectionRecord& b) {
    const auto ia = order.find(a.clip_id);
    const auto ib = order.find(b.clip_id);
    const std::size_t ka = ia == order.end() ? order.size() : ia->second;
    const std::size_t kb = ib == order.end() ? order.size() : ib->second;
    if (ka != kb) return ka < kb;
    return a.clip_id < b.clip_id;
  });
  std::string text;
  for (const auto& r : records) text += record_to_json(r).dump() + '\n';
  return text;
}

std::string templates_revision(const std::optional<std::string>& prompt_dir) {
  if (!prompt_dir) return "builtin";
  const std::string cmd = "git -C '" + *prompt_dir + "' describe --always --dirty 2>/dev/null";
  std::string out;
  if (FILE* pipe = ::popen(cmd.c_str(), "r")) {
    char buf[256];
    while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
    if (::pclose(pipe) != 0) out.clear();
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  return out.empty() ? "unversioned" : out;
}

json template_info(const prompting::PromptTemplate& t) {
  return json{{"id", t.id()}, {"version", t.version()}, {"content_hash", t.content_hash()}};
}

json provenance(const PipelineConfig& cfg) {
  return json{{"templates",
               {{"p1", template_info(cfg.templates.show_recognition)},
                {"p2", template_info(cfg.templates.description)},
                {"t", template_info(cfg.templates.correction)}}},
              {"models", {{"vlmm", cfg.vlmm_model}, {"llm", cfg.llm_model}}},
              {"asr_model", cfg.asr_model},
              {"setting", cfg.setting},
              {"media_mode", to_string(cfg.media_mode)},
              {"frame_count", cfg.frame_count},
              {"temperature", cfg.temperature},
              {"max_tokens", cfg.max_tokens}};
}

}  // namespace

std::vector<CorrectionRecord> load_records(const std::string& run_dir) {
  return read_records(fs::path(run_dir) / kRecordsFile);
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  std::atomic<std::size_t> next{0};
  const auto loop = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(loop);
  if (threads > 0) loop();
}

RunSummary run(const corpus::Manifest& manifest, corpus::Split split, const HypothesisSet& hyps,
               const PipelineConfig& cfg, model::ChatClient& vlmm, model::ChatClient& llm, const RunOptions& opts) {
  std::vector<const corpus::Clip*> clips;
  std::vector<const Hypothesis*> clip_hyps;
  std::unordered_map<std::string, std::size_t> order;
  for (const auto& clip : manifest.clips) {
    if (clip.split != split) continue;
    const Hypothesis* h = hyps.find(clip.id, cfg.asr_model, cfg.setting);
    if (h == nullptr) throw MissingHypothesis(clip.id);
    order.emplace(clip.id, clips.size());
    clips.push_back(&clip);
    clip_hyps.push_back(h);
  }

  const fs::path dir(opts.run_dir);
  fs::create_directories(dir);
  const fs::path run_json_path = dir / kRunJson;
  const fs::path records_path = dir / kRecordsFile;

  const json prov = provenance(cfg);
  json run_json = json::object();
  if (fs::exists(run_json_path)) {
    std::ifstream in(run_json_path);
    try {
      run_json = json::parse(in);
    } catch (const json::exception& e) {
      throw RunDirMismatch("unreadable " + run_json_path.string() + ": " + e.what());
    }
    if (run_json.contains("provenance") && run_json["provenance"] != prov) {
      throw RunDirMismatch("run directory " + dir.string() +
                           " was produced with different templates, models or settings");
    }
  }

  std::vector<CorrectionRecord> existing = read_records(records_path);
  std::unordered_set<std::string> done;
  for (const auto& r : existing) {
    if (r.hypothesis.asr_model != cfg.asr_model || r.hypothesis.setting != cfg.setting) {
      throw RunDirMismatch("run directory holds records for (" + r.hypothesis.asr_model + ", " +
                           r.hypothesis.setting + ")");
    }
    done.insert(r.clip_id);
  }
  // Drop any torn trailing line before appending.
  write_file_atomically(records_path, records_text(existing, order));

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (!done.contains(clips[i]->id)) pending.push_back(i);
  }

  RunSummary summary;
  summary.clips = clips.size();
  summary.skipped = clips.size() - pending.size();

  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  AppendFile records(records_path, false);
  AppendFile failures(dir / kFailuresFile, true);
  std::atomic<std::size_t> processed{0};
  std::atomic<std::size_t> failed{0};

  parallel_for(pending.size(), cfg.workers, [&](std::size_t k) {
    const std::size_t i = pending[k];
    const corpus::Clip& clip = *clips[i];
    const char* stage = "context";
    try {
      ContextBundle bundle;
      const ContextBundle* pre = nullptr;
      if (opts.contexts) {
        if (const auto it = opts.contexts->find(clip.id); it != opts.contexts->end()) pre = &it->second;
      }
      bundle = pre ? *pre : extract_context(clip, cfg, vlmm);
      stage = "correct";
      CorrectionRecord rec = correct(*clip_hyps[i], bundle, cfg, llm);
      stage = "persist";
      records.append_line(record_to_json(rec).dump());
      ++processed;
      if (opts.on_record) opts.on_record(rec);
    } catch (const std::exception& e) {
      ++failed;
      failures.append_line(json{{"clip_id", clip.id}, {"stage", stage}, {"error", e.what()}}.dump());
    }
  });

  summary.processed = processed.load();
  summary.failed = failed.load();

  write_file_atomically(records_path, records_text(read_records(records_path), order));

  json invocation{{"started_at", started_at},
                  {"finished_at", utc_now()},
                  {"elapsed_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()},
                  {"clips", summary.clips},
                  {"skipped", summary.skipped},
                  {"processed", summary.processed},
                  {"failed", summary.failed},
                  {"vlmm_client", {{"requests", vlmm.stats().requests},
                                   {"cache_hits", vlmm.stats().cache_hits},
                                   {"backend_calls", vlmm.stats().backend_calls},
                                   {"retries", vlmm.stats().retries}}},
                  {"llm_client", {{"requests", llm.stats().requests},
                                  {"cache_hits", llm.stats().cache_hits},
                                  {"backend_calls", llm.stats().backend_calls},
                                  {"retries", llm.stats().retries}}}};
  run_json["manifest"] = manifest.name;
  run_json["split"] = std::string(corpus::to_string(split));
  run_json["provenance"] = prov;
  run_json["templates_revision"] = templates_revision(cfg.prompt_dir);
  run_json["config"] = opts.effective_config;
  if (!run_json.contains("invocations")) run_json["invocations"] = json::array();
  run_json["invocations"].push_back(std::move(invocation));
  write_file_atomically(run_json_path, run_json.dump(2) + '\n');
  return summary;
}

std::vector<ContextBundle> extract_contexts(const corpus::Manifest& manifest, corpus::Split split,
                                            const PipelineConfig& cfg, model::ChatClient& vlmm,
                                            std::vector<ContextFailure>& failures) {
  std::vector<const corpus::Clip*> clips;
  for (const auto& clip : manifest.clips) {
    if (clip.split == split) clips.push_back(&clip);
  }
  std::vector<std::optional<ContextBundle>> slots(clips.size());
  std::vector<std::optional<std::string>> errors(clips.size());
  parallel_for(clips.size(), cfg.workers, [&](std::size_t i) {
    try {
      slots[i] = extract_context(*clips[i], cfg, vlmm);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::vector<ContextBundle> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (slots[i]) out.push_back(std::move(*slots[i]));
    if (errors[i]) failures.push_back({clips[i]->id, *errors[i]});
  }
  return out;
}

}  // namespace vpc::pipeline
