#include "vpc/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "vpc/corpus.hpp"
#include "vpc/mock_backends.hpp"
#include "vpc/pipeline.hpp"
#include "vpc/reporting.hpp"
#include "vpc/textnorm.hpp"

namespace vpc::cli {

using nlohmann::json;

namespace {

// Raised for configuration and usage problems; maps to kExitUsage.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string canonical_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  return key;
}

int to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("setting '" + key + "' expects an integer (got '" + value + "')");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw UsageError("setting '" + key + "' expects a number (got '" + value + "')");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && ((out.front() == '"' && out.back() == '"') || (out.front() == '\'' && out.back() == '\''))) {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "manifest",    "prompt-dir",   "cache-dir", "llm-endpoint", "vlmm-endpoint", "asr-endpoint",
      "llm-model",   "vlmm-model",   "workers",   "media-mode",   "frame-count",   "extractor",
      "norm-profile", "mock",        "temperature", "max-tokens", "max-retries",   "retry-base-ms",
      "split",       "asr-model",    "setting",   "llm-max-in-flight", "vlmm-max-in-flight"};
  return keys;
}

void apply_setting(GlobalConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key = canonical_key(raw_key);
  if (key == "manifest") {
    cfg.manifest = value;
  } else if (key == "prompt-dir") {
    cfg.prompt_dir = value;
  } else if (key == "cache-dir") {
    cfg.cache_dir = value;
  } else if (key == "llm-endpoint") {
    cfg.llm_endpoint = value;
  } else if (key == "vlmm-endpoint") {
    cfg.vlmm_endpoint = value;
  } else if (key == "asr-endpoint") {
    cfg.asr_endpoint = value;
  } else if (key == "llm-model") {
    cfg.llm_model = value;
  } else if (key == "vlmm-model") {
    cfg.vlmm_model = value;
  } else if (key == "workers") {
    cfg.workers = to_int(key, value);
    if (cfg.workers < 1) throw UsageError("workers must be at least 1");
  } else if (key == "media-mode") {
    if (value != "frames" && value != "video-url") throw UsageError("media-mode must be frames or video-url");
    cfg.media_mode = value;
  } else if (key == "frame-count") {
    cfg.frame_count = to_int(key, value);
    if (cfg.frame_count < 1) throw UsageError("frame-count must be at least 1");
  } else if (key == "extractor") {
    cfg.extractor = value;
  } else if (key == "norm-profile") {
    cfg.norm_profile = value;
  } else if (key == "mock") {
    if (value != "off" && value != "identity" && value != "oracle" && value.rfind("scripted:", 0) != 0) {
      throw UsageError("mock must be off, identity, oracle or scripted:<fixture>");
    }
    cfg.mock = value;
  } else if (key == "temperature") {
    cfg.temperature = to_double(key, value);
  } else if (key == "max-tokens") {
    cfg.max_tokens = to_int(key, value);
    if (cfg.max_tokens < 1) throw UsageError("max-tokens must be positive");
  } else if (key == "max-retries") {
    cfg.max_retries = to_int(key, value);
    if (cfg.max_retries < 0) throw UsageError("max-retries must be non-negative");
  } else if (key == "retry-base-ms") {
    cfg.retry_base_ms = to_int(key, value);
    if (cfg.retry_base_ms < 0) throw UsageError("retry-base-ms must be non-negative");
  } else if (key == "llm-max-in-flight" || key == "vlmm-max-in-flight") {
    const int v = to_int(key, value);
    if (v < 0 || v > 1024) throw UsageError(key + " must be between 0 and 1024");
    (key == "llm-max-in-flight" ? cfg.llm_max_in_flight : cfg.vlmm_max_in_flight) = v;
  } else if (key == "split") {
    if (!corpus::parse_split(value)) throw UsageError("split must be train, valid or test");
    cfg.split = value;
  } else if (key == "asr-model") {
    cfg.asr_model = value;
  } else if (key == "setting") {
    cfg.setting = value;
  } else {
    throw UsageError("unknown setting '" + raw_key + "'");
  }
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("{}:{}: expected 'key = value'", path, line_no));
    }
    out[canonical_key(trim(line.substr(0, eq)))] = trim(line.substr(eq + 1));
  }
  return out;
}

json config_to_json(const GlobalConfig& c) {
  return json{{"manifest", c.manifest},         {"prompt_dir", c.prompt_dir},     {"cache_dir", c.cache_dir},
              {"llm_endpoint", c.llm_endpoint}, {"vlmm_endpoint", c.vlmm_endpoint}, {"asr_endpoint", c.asr_endpoint},
              {"llm_model", c.llm_model},       {"vlmm_model", c.vlmm_model},     {"workers", c.workers},
              {"media_mode", c.media_mode},     {"frame_count", c.frame_count},   {"extractor", c.extractor},
              {"norm_profile", c.norm_profile}, {"mock", c.mock},                 {"temperature", c.temperature},
              {"max_tokens", c.max_tokens},     {"max_retries", c.max_retries},   {"retry_base_ms", c.retry_base_ms},
              {"split", c.split},               {"asr_model", c.asr_model},       {"setting", c.setting},
              {"llm_max_in_flight", c.llm_max_in_flight}, {"vlmm_max_in_flight", c.vlmm_max_in_flight}};
}

namespace {

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

corpus::Manifest load_manifest_or_usage(const GlobalConfig& cfg) {
  if (cfg.manifest.empty()) throw UsageError("--manifest is required");
  try {
    return corpus::load_manifest(cfg.manifest);
  } catch (const corpus::MalformedRecord& e) {
    throw UsageError(e.what());
  } catch (const corpus::DuplicateId& e) {
    throw UsageError(e.what());
  }
}

corpus::Split split_of(const GlobalConfig& cfg) { return *corpus::parse_split(cfg.split); }

model::RetryPolicy retry_policy(const GlobalConfig& cfg) {
  model::RetryPolicy p;
  p.max_retries = cfg.max_retries;
  p.base_delay = std::chrono::milliseconds(cfg.retry_base_ms);
  return p;
}

std::shared_ptr<model::Transport> transport_for(const Environment& env) {
  if (env.transport) return env.transport;
  return std::make_shared<model::HttpTransport>();
}

struct Clients {
  std::shared_ptr<model::ChatClient> vlmm;
  std::shared_ptr<model::ChatClient> llm;
};

Clients make_clients(const GlobalConfig& cfg, const corpus::Manifest& manifest, const Environment& env) {
  std::shared_ptr<const model::ResponseCache> cache;
  if (!cfg.cache_dir.empty()) cache = std::make_shared<model::ResponseCache>(cfg.cache_dir);
  const model::RetryPolicy policy = retry_policy(cfg);
  const int default_in_flight = std::max(1, cfg.workers * 2);
  const int vlmm_in_flight = cfg.vlmm_max_in_flight > 0 ? cfg.vlmm_max_in_flight : default_in_flight;
  const int llm_in_flight = cfg.llm_max_in_flight > 0 ? cfg.llm_max_in_flight : default_in_flight;

  if (cfg.mock != "off") {
    std::map<std::string, std::string> references;
    for (const auto& clip : manifest.clips) references[clip.id] = clip.reference;
    model::MockMode mode = model::MockMode::kIdentity;
    model::MockScript script;
    if (cfg.mock == "oracle") {
      mode = model::MockMode::kOracle;
    } else if (cfg.mock.rfind("scripted:", 0) == 0) {
      mode = model::MockMode::kScripted;
      try {
        script = model::load_mock_script(cfg.mock.substr(9));
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    }
    auto backend = std::make_shared<model::MockBackend>(mode, std::move(references), std::move(script));
    return {std::make_shared<model::ChatClient>(backend, cache, policy, vlmm_in_flight),
            std::make_shared<model::ChatClient>(backend, cache, policy, llm_in_flight)};
  }

  auto transport = transport_for(env);
  auto vlmm = std::make_shared<model::HttpChatBackend>(transport, model::api_key_from_env(model::EndpointKind::kVlmm));
  auto llm = std::make_shared<model::HttpChatBackend>(transport, model::api_key_from_env(model::EndpointKind::kLlm));
  return {std::make_shared<model::ChatClient>(vlmm, cache, policy, vlmm_in_flight),
          std::make_shared<model::ChatClient>(llm, cache, policy, llm_in_flight)};
}

void check_mock_guard(const GlobalConfig& cfg) {
  if (cfg.mock == "off") return;
  if (!cfg.llm_endpoint.empty() || !cfg.vlmm_endpoint.empty() || !cfg.asr_endpoint.empty()) {
    throw UsageError("--mock " + cfg.mock + " cannot be combined with network endpoints");
  }
}

// `correcting` is false for the context-only stage, which needs neither the
// LLM nor hypotheses.
pipeline::PipelineConfig pipeline_config(const GlobalConfig& cfg, bool needs_vlmm, bool correcting = true) {
  check_mock_guard(cfg);
  if (cfg.mock == "off") {
    if (correcting && cfg.llm_endpoint.empty()) throw UsageError("--llm-endpoint is required unless --mock is set");
    if (needs_vlmm && cfg.vlmm_endpoint.empty()) {
      throw UsageError("--vlmm-endpoint is required unless --mock is set");
    }
  }
  pipeline::PipelineConfig p;
  p.vlmm_endpoint = cfg.vlmm_endpoint;
  p.llm_endpoint = cfg.llm_endpoint;
  p.vlmm_model = cfg.vlmm_model;
  p.llm_model = cfg.llm_model;
  p.media_mode = pipeline::parse_media_mode(cfg.media_mode);
  p.frame_count = cfg.frame_count;
  p.extractor = model::parse_extractor_command(cfg.extractor);
  if (needs_vlmm && p.media_mode == pipeline::MediaMode::kFrames && p.extractor.program.empty()) {
    throw UsageError("--extractor is required with --media-mode frames");
  }
  p.temperature = cfg.temperature;
  p.max_tokens = cfg.max_tokens;
  try {
    p.templates = prompting::resolve_templates(cfg.prompt_dir.empty() ? std::nullopt
                                                                      : std::optional<std::string>(cfg.prompt_dir));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!cfg.prompt_dir.empty()) p.prompt_dir = cfg.prompt_dir;
  p.workers = cfg.workers;
  p.asr_model = cfg.asr_model;
  p.setting = cfg.setting;
  if (correcting && p.asr_model.empty()) throw UsageError("--asr-model is required");
  return p;
}

textnorm::NormConfig norm_of(const GlobalConfig& cfg) {
  try {
    return textnorm::profile_by_name(cfg.norm_profile);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_validate(const GlobalConfig& cfg, Streams io) {
  const corpus::Manifest m = load_manifest_or_usage(cfg);
  io.out << fmt::format("manifest {} ({} clips, schema v{})\n", m.name, m.clips.size(), m.schema_version);
  for (const corpus::Split split : {corpus::Split::kTrain, corpus::Split::kValid, corpus::Split::kTest}) {
    const corpus::CorpusStats s = corpus::split_stats(m, split);
    io.out << fmt::format("split {:<5} clip_count={} total_hours={:.3f} mean_duration_s={:.2f} mean_speech_density={}\n",
                          corpus::to_string(split), s.clip_count, s.total_hours, s.mean_duration_s,
                          s.mean_speech_density ? fmt::format("{:.3f}", *s.mean_speech_density) : "n/a");
    for (const auto& [show, count] : s.per_show_counts) io.out << fmt::format("  show {}: {}\n", show, count);
  }
  const corpus::ValidationReport report = corpus::validate_manifest(m);
  io.out << fmt::format("violations: {}\n", report.violations.size());
  for (const auto& v : report.violations) {
    io.out << fmt::format("  {} {}: {}\n", corpus::to_string(v.kind), v.clip_id, v.message);
  }
  return report.valid() ? kExitOk : kExitFailure;
}

struct TranscribeOptions {
  std::string out;
};

int cmd_transcribe(const GlobalConfig& cfg, const TranscribeOptions& opts, const Environment& env, Streams io) {
  check_mock_guard(cfg);
  if (cfg.asr_endpoint.empty()) throw UsageError("--asr-endpoint is required");
  if (opts.out.empty()) throw UsageError("--out is required");
  const corpus::Manifest m = load_manifest_or_usage(cfg);
  const corpus::Split split = split_of(cfg);
  std::vector<const corpus::Clip*> clips;
  for (const auto& clip : m.clips) {
    if (clip.split == split) clips.push_back(&clip);
  }

  std::string url = cfg.asr_endpoint;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/transcribe";
  const auto transport = transport_for(env);
  const model::RetryPolicy policy = retry_policy(cfg);

  std::vector<std::optional<pipeline::Hypothesis>> results(clips.size());
  std::vector<std::string> errors(clips.size());
  pipeline::parallel_for(clips.size(), cfg.workers, [&](std::size_t i) {
    const corpus::Clip& clip = *clips[i];
    std::string format;
    if (const auto dot = clip.audio_ref.find_last_of('.'); dot != std::string::npos) {
      format = clip.audio_ref.substr(dot + 1);
    }
    const std::string body = json{{"audio_ref", clip.audio_ref}, {"format", format}}.dump();
    for (int attempt = 0;; ++attempt) {
      std::string problem;
      bool retry = false;
      try {
        const model::HttpResponse res =
            transport->post(url, {{"Content-Type", "application/json"}}, body, std::chrono::seconds(600));
        if (res.status == 200) {
          const json j = json::parse(res.body);
          if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || !j.contains("model_id") ||
              !j["model_id"].is_string() || !j.contains("audio_seconds") || !j["audio_seconds"].is_number()) {
            throw Error("response does not match the transcription schema");
          }
          results[i] = pipeline::Hypothesis{clip.id, cfg.asr_model.empty() ? j["model_id"].get<std::string>()
                                                                            : cfg.asr_model,
                                            cfg.setting, j["text"].get<std::string>()};
          return;
        }
        retry = res.status == 429 || res.status >= 500;
        problem = fmt::format("HTTP {}: {}", res.status, res.body.substr(0, 200));
      } catch (const model::TransportError& e) {
        retry = true;
        problem = e.what();
      } catch (const std::exception& e) {
        problem = e.what();
      }
      if (!retry || attempt >= policy.max_retries) {
        errors[i] = problem;
        return;
      }
      std::this_thread::sleep_for(policy.base_delay * (1 << std::min(attempt, 10)));
    }
  });

  std::vector<pipeline::Hypothesis> hyps;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (results[i]) {
      hyps.push_back(*results[i]);
    } else {
      ++failed;
      io.err << fmt::format("transcribe {}: {}\n", clips[i]->id, errors[i]);
    }
  }
  std::ofstream out(opts.out, std::ios::trunc);
  if (!out) throw Error("cannot write '" + opts.out + "'");
  pipeline::write_hypotheses(hyps, out);
  io.out << fmt::format("transcribed {} of {} clips into {}\n", hyps.size(), clips.size(), opts.out);
  return failed == 0 ? kExitOk : kExitFailure;
}

struct ContextOptions {
  std::string out;
};

int cmd_context(const GlobalConfig& cfg, const ContextOptions& opts, const Environment& env, Streams io) {
  if (opts.out.empty()) throw UsageError("--out is required");
  const pipeline::PipelineConfig pcfg = pipeline_config(cfg, true, false);
  const corpus::Manifest m = load_manifest_or_usage(cfg);
  const Clients clients = make_clients(cfg, m, env);
  std::vector<pipeline::ContextFailure> failures;
  const auto bundles = pipeline::extract_contexts(m, split_of(cfg), pcfg, *clients.vlmm, failures);
  std::ofstream out(opts.out, std::ios::trunc);
  if (!out) throw Error("cannot write '" + opts.out + "'");
  for (const auto& b : bundles) out << pipeline::bundle_to_json(b).dump() << '\n';
  for (const auto& f : failures) io.err << fmt::format("context {}: {}\n", f.clip_id, f.error);
  io.out << fmt::format("extracted context for {} clips ({} failed) into {}\n", bundles.size(), failures.size(),
                        opts.out);
  return failures.empty() ? kExitOk : kExitFailure;
}

struct RunOptions {
  std::string hypotheses;
  std::string contexts;
  std::string run_dir;
};

int cmd_run(const GlobalConfig& cfg, const RunOptions& opts, bool correct_only, const Environment& env,
            Streams io) {
  if (opts.hypotheses.empty()) throw UsageError("--hypotheses is required");
  if (opts.run_dir.empty()) throw UsageError("--run-dir is required");
  if (correct_only && opts.contexts.empty()) throw UsageError("--contexts is required");
  const pipeline::PipelineConfig pcfg = pipeline_config(cfg, !correct_only);
  const corpus::Manifest m = load_manifest_or_usage(cfg);
  pipeline::HypothesisSet hyps;
  try {
    hyps = pipeline::load_hypotheses(opts.hypotheses);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  std::map<std::string, pipeline::ContextBundle> contexts;
  if (correct_only) {
    std::ifstream in(opts.contexts);
    if (!in) throw UsageError("cannot open contexts file '" + opts.contexts + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        auto b = pipeline::bundle_from_json(json::parse(line));
        contexts.emplace(b.clip_id, std::move(b));
      } catch (const std::exception& e) {
        throw UsageError(fmt::format("{}:{}: {}", opts.contexts, line_no, e.what()));
      }
    }
    for (const auto& clip : m.clips) {
      if (clip.split == split_of(cfg) && !contexts.contains(clip.id)) {
        io.err << "no context for clip '" << clip.id << "'\n";
        return kExitFailure;
      }
    }
  }

  const Clients clients = make_clients(cfg, m, env);
  pipeline::RunOptions ropts;
  ropts.run_dir = opts.run_dir;
  ropts.contexts = correct_only ? &contexts : nullptr;
  ropts.effective_config = config_to_json(cfg);
  const pipeline::RunSummary s = pipeline::run(m, split_of(cfg), hyps, pcfg, *clients.vlmm, *clients.llm, ropts);
  io.out << fmt::format("{} clips: {} already done, {} corrected, {} failed -> {}\n", s.clips, s.skipped,
                        s.processed, s.failed, opts.run_dir);
  if (s.failed > 0) {
    io.err << fmt::format("{} clips failed; see {}/{}\n", s.failed, opts.run_dir, pipeline::kFailuresFile);
  }
  return s.failed == 0 ? kExitOk : kExitFailure;
}

struct EvalOptions {
  std::vector<std::string> runs;
  std::string format = "table";
  std::string out;
  std::size_t k = 5;
};

std::vector<pipeline::CorrectionRecord> gather_records(const std::vector<std::string>& runs) {
  if (runs.empty()) throw UsageError("at least one --run directory is required");
  std::vector<pipeline::CorrectionRecord> records;
  for (const auto& dir : runs) {
    auto part = pipeline::load_records(dir);
    records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return records;
}

int cmd_eval(const GlobalConfig& cfg, const EvalOptions& opts, Streams io) {
  const corpus::Manifest m = load_manifest_or_usage(cfg);
  const textnorm::NormConfig norm = norm_of(cfg);
  const auto records = gather_records(opts.runs);
  const reporting::EvalReport report = reporting::evaluate(records, m, norm);
  const std::string json_text = reporting::report_to_json(report).dump(2) + '\n';
  std::string out_path = opts.out;
  if (out_path.empty() && opts.runs.size() == 1) out_path = opts.runs.front() + "/report.json";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write '" + out_path + "'");
    out << json_text;
  }
  if (opts.format == "json") {
    io.out << json_text;
  } else {
    io.out << reporting::format_table(report);
  }
  return kExitOk;
}

int cmd_cases(const GlobalConfig& cfg, const EvalOptions& opts, Streams io) {
  const corpus::Manifest m = load_manifest_or_usage(cfg);
  const auto records = gather_records(opts.runs);
  const auto cases = reporting::diff_cases(records, m, opts.k, norm_of(cfg));
  if (opts.format == "json") {
    json arr = json::array();
    for (const auto& c : cases) arr.push_back(reporting::case_to_json(c));
    io.out << arr.dump(2) << '\n';
  } else {
    for (const auto& c : cases) io.out << reporting::format_case(c) << '\n';
  }
  return kExitOk;
}

struct TemplatesOptions {
  std::string out_dir;
};

// Lists the templates in effect and optionally writes them out as editable
// .prompt files.
int cmd_templates(const GlobalConfig& cfg, const TemplatesOptions& opts, Streams io) {
  prompting::TemplateSet set;
  try {
    set = prompting::resolve_templates(cfg.prompt_dir.empty() ? std::nullopt
                                                              : std::optional<std::string>(cfg.prompt_dir));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);
  for (const auto* t : {&set.show_recognition, &set.description, &set.correction}) {
    io.out << fmt::format("{} v{} {}\n", t->id(), t->version(), t->content_hash());
    if (!opts.out_dir.empty()) prompting::save_template(*t, opts.out_dir + "/" + t->id() + ".prompt");
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env) {
  CLI::App app{"Video-guided post-correction of ASR transcripts", "vpc"};
  app.require_subcommand(1);

  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_options;
  for (const auto& key : config_keys()) {
    flag_options[key] = app.add_option("--" + key, flag_values[key]);
  }
  const std::map<std::string, std::string> help{
      {"manifest", "clip manifest (JSON lines)"},
      {"prompt-dir", "directory of .prompt files overriding the builtin templates"},
      {"cache-dir", "response cache directory; unset disables caching"},
      {"llm-endpoint", "OpenAI-compatible base URL of the corrector"},
      {"vlmm-endpoint", "OpenAI-compatible base URL of the video model"},
      {"asr-endpoint", "base URL of the transcription service"},
      {"llm-model", "corrector model id (default gpt-4o)"},
      {"vlmm-model", "video model id (default VideoLLaMA2)"},
      {"workers", "clips processed concurrently (default 4)"},
      {"media-mode", "frames | video-url"},
      {"frame-count", "frames sampled per clip (default 8)"},
      {"extractor", "frame grabber command, called as <cmd> <video> <seconds> <out>"},
      {"norm-profile", "default-v1 | verbatim-v1"},
      {"mock", "off | identity | oracle | scripted:<fixture.json>"},
      {"temperature", "sampling temperature (default 0)"},
      {"max-tokens", "completion token limit (default 1024)"},
      {"max-retries", "retries for 429, 5xx and connection failures (default 5)"},
      {"retry-base-ms", "first backoff delay in ms, doubled per retry (default 500)"},
      {"split", "train, valid or test (default test)"},
      {"asr-model", "ASR model whose hypotheses are corrected"},
      {"setting", "fine-tuning setting of the hypotheses (default no-ft)"},
      {"llm-max-in-flight", "concurrent corrector requests (default 2 x workers)"},
      {"vlmm-max-in-flight", "concurrent video model requests (default 2 x workers)"},
  };
  for (const auto& [key, text] : help) flag_options.at(key)->description(text);
  std::string config_path;
  app.add_option("--config", config_path, "key = value config file");

  TranscribeOptions transcribe_opts;
  ContextOptions context_opts;
  RunOptions run_opts;
  EvalOptions eval_opts;
  TemplatesOptions templates_opts;

  auto* validate = app.add_subcommand("validate", "check a clip manifest and print per-split statistics");
  auto* transcribe = app.add_subcommand("transcribe", "collect hypotheses from a transcription service");
  transcribe->add_option("--out", transcribe_opts.out, "hypothesis file to write");
  auto* context = app.add_subcommand("context", "extract video context for every clip of a split");
  context->add_option("--out", context_opts.out, "context bundle file to write");
  auto* correct = app.add_subcommand("correct", "correct hypotheses using previously extracted contexts");
  correct->add_option("--hypotheses", run_opts.hypotheses);
  correct->add_option("--contexts", run_opts.contexts);
  correct->add_option("--run-dir", run_opts.run_dir);
  auto* run = app.add_subcommand("run", "extract context and correct every clip of a split (resumable)");
  run->add_option("--hypotheses", run_opts.hypotheses);
  run->add_option("--run-dir", run_opts.run_dir);
  auto* eval = app.add_subcommand("eval", "score run directories before and after correction");
  eval->add_option("--run", eval_opts.runs, "run directory (repeatable)");
  eval->add_option("--format", eval_opts.format)->check(CLI::IsMember({"table", "json"}));
  eval->add_option("--out", eval_opts.out, "report.json destination");
  auto* cases = app.add_subcommand("cases", "show the clips most improved by correction");
  cases->add_option("--run", eval_opts.runs, "run directory (repeatable)");
  cases->add_option("-k", eval_opts.k, "number of cases");
  cases->add_option("--format", eval_opts.format)->check(CLI::IsMember({"table", "json"}));
  auto* templates = app.add_subcommand("templates", "list the prompt templates in effect");
  templates->add_option("--out-dir", templates_opts.out_dir, "also write them here as .prompt files");
  for (auto* sub : {validate, transcribe, context, correct, run, eval, cases, templates}) sub->fallthrough();

  std::vector<const char*> argv{"vpc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Streams io{out, err};
  try {
    GlobalConfig cfg;
    if (!config_path.empty()) {
      for (const auto& [k, v] : read_config_file(config_path)) apply_setting(cfg, k, v);
    }
    for (const auto& key : config_keys()) {
      std::string env_name = "VPC_" + key;
      std::replace(env_name.begin(), env_name.end(), '-', '_');
      std::transform(env_name.begin(), env_name.end(), env_name.begin(),
                     [](unsigned char c) { return std::toupper(c); });
      if (const char* v = std::getenv(env_name.c_str())) apply_setting(cfg, key, v);
    }
    for (const auto& key : config_keys()) {
      if (flag_options[key]->count() > 0) apply_setting(cfg, key, flag_values[key]);
    }

    if (validate->parsed()) return cmd_validate(cfg, io);
    if (transcribe->parsed()) return cmd_transcribe(cfg, transcribe_opts, env, io);
    if (context->parsed()) return cmd_context(cfg, context_opts, env, io);
    if (correct->parsed()) return cmd_run(cfg, run_opts, true, env, io);
    if (run->parsed()) return cmd_run(cfg, run_opts, false, env, io);
    if (eval->parsed()) return cmd_eval(cfg, eval_opts, io);
    if (cases->parsed()) return cmd_cases(cfg, eval_opts, io);
    if (templates->parsed()) return cmd_templates(cfg, templates_opts, io);
  } catch (const UsageError& e) {
    err << "vpc: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "vpc: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace vpc::cli
