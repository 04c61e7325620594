#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpc/model_client.hpp"

namespace vpc::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // violations, failed clips, domain errors
inline constexpr int kExitUsage = 2;    // bad flags, config or unparseable input

// Effective settings. Resolved from defaults, then the config file, then
// VPC_* environment variables, then command-line flags.
struct GlobalConfig {
  std::string manifest;
  std::string prompt_dir;
  std::string cache_dir;
  std::string llm_endpoint;
  std::string vlmm_endpoint;
  std::string asr_endpoint;
  std::string llm_model = "gpt-4o";
  std::string vlmm_model = "VideoLLaMA2";
  int workers = 4;
  std::string media_mode = "frames";
  int frame_count = 8;
  std::string extractor;
  std::string norm_profile = "default-v1";
  std::string mock = "off";  // off | identity | oracle | scripted:<fixture>
  double temperature = 0.0;
  int max_tokens = 1024;
  int max_retries = 5;
  int retry_base_ms = 500;
  // Concurrent requests per endpoint; 0 means twice the worker count.
  int llm_max_in_flight = 0;
  int vlmm_max_in_flight = 0;
  std::string split = "test";
  std::string asr_model;
  std::string setting = "no-ft";
};

nlohmann::json config_to_json(const GlobalConfig& cfg);

// Names accepted in the config file and as VPC_<NAME> environment variables
// (upper-cased, dashes as underscores).
const std::vector<std::string>& config_keys();

// Applies `key = value` pairs. Throws vpc::Error on unknown keys or bad values.
void apply_setting(GlobalConfig& cfg, const std::string& key, const std::string& value);

// Config file: one `key = value` per line; '#' starts a comment; keys use
// the long flag names (dashes or underscores).
std::map<std::string, std::string> read_config_file(const std::string& path);

// Hooks for tests: every HTTP call of the process goes through `transport`
// when set.
struct Environment {
  std::shared_ptr<model::Transport> transport;
};

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const Environment& env = {});

}  // namespace vpc::cli
