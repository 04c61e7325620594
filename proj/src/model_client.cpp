#include "vpc/model_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "vpc/digest.hpp"

namespace vpc::model {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(EndpointKind kind) { return kind == EndpointKind::kVlmm ? "vlmm" : "llm"; }

const char* to_string(Role role) { return role == Role::kSystem ? "system" : "user"; }

namespace {

EndpointKind kind_from_string(const std::string& s) {
  if (s == "vlmm") return EndpointKind::kVlmm;
  if (s == "llm") return EndpointKind::kLlm;
  throw Error("unknown endpoint kind '" + s + "'");
}

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::kSystem;
  if (s == "user") return Role::kUser;
  throw Error("unsupported message role '" + s + "'");
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void check_request(const ChatRequest& req) {
  if (req.messages.empty()) throw Error("chat request needs at least one message");
  if (req.model_id.empty()) throw Error("chat request needs a model id");
  if (req.max_tokens <= 0) throw Error("max_tokens must be positive");
}

json canonical_request(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& msg : req.messages) {
    json parts = json::array();
    for (const auto& part : msg.parts) {
      if (const auto* text = std::get_if<TextPart>(&part)) {
        parts.push_back({{"type", "text"}, {"text", text->text}});
      } else if (const auto* image = std::get_if<ImagePart>(&part)) {
        parts.push_back({{"type", "image"}, {"mime", image->mime}, {"sha256", sha256_hex(image->base64)}});
      } else if (const auto* video = std::get_if<VideoUrlPart>(&part)) {
        parts.push_back({{"type", "video_url"}, {"url", video->url}});
      }
    }
    messages.push_back({{"role", to_string(msg.role)}, {"parts", std::move(parts)}});
  }
  return json{{"key_version", 1},
              {"kind", to_string(req.kind)},
              {"model", req.model_id},
              {"messages", std::move(messages)},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens},
              {"prompt_hash", req.template_hash}};
}

std::string cache_key(const ChatRequest& req) { return sha256_hex(canonical_request(req).dump()); }

json request_to_json(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& msg : req.messages) {
    json parts = json::array();
    for (const auto& part : msg.parts) {
      if (const auto* text = std::get_if<TextPart>(&part)) {
        parts.push_back({{"type", "text"}, {"text", text->text}});
      } else if (const auto* image = std::get_if<ImagePart>(&part)) {
        parts.push_back({{"type", "image"}, {"mime", image->mime}, {"data", image->base64}});
      } else if (const auto* video = std::get_if<VideoUrlPart>(&part)) {
        parts.push_back({{"type", "video_url"}, {"url", video->url}});
      }
    }
    messages.push_back({{"role", to_string(msg.role)}, {"parts", std::move(parts)}});
  }
  return json{{"kind", to_string(req.kind)},       {"endpoint", req.endpoint},
              {"model", req.model_id},             {"messages", std::move(messages)},
              {"temperature", req.temperature},    {"max_tokens", req.max_tokens},
              {"prompt_hash", req.template_hash}};
}

ChatRequest request_from_json(const json& j) {
  ChatRequest req;
  req.kind = kind_from_string(j.at("kind").get<std::string>());
  req.endpoint = j.value("endpoint", "");
  req.model_id = j.at("model").get<std::string>();
  req.temperature = j.value("temperature", 0.0);
  req.max_tokens = j.value("max_tokens", kDefaultMaxTokens);
  req.template_hash = j.value("prompt_hash", "");
  for (const auto& m : j.at("messages")) {
    Message msg;
    msg.role = role_from_string(m.at("role").get<std::string>());
    for (const auto& p : m.at("parts")) {
      const std::string type = p.at("type").get<std::string>();
      if (type == "text") {
        msg.parts.emplace_back(TextPart{p.at("text").get<std::string>()});
      } else if (type == "image") {
        msg.parts.emplace_back(ImagePart{p.at("mime").get<std::string>(), p.at("data").get<std::string>()});
      } else if (type == "video_url") {
        msg.parts.emplace_back(VideoUrlPart{p.at("url").get<std::string>()});
      } else {
        throw Error("unknown content part type '" + type + "'");
      }
    }
    req.messages.push_back(std::move(msg));
  }
  return req;
}

json wire_body(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& msg : req.messages) {
    json content;
    if (msg.parts.size() == 1 && std::holds_alternative<TextPart>(msg.parts.front())) {
      content = std::get<TextPart>(msg.parts.front()).text;
    } else {
      content = json::array();
      for (const auto& part : msg.parts) {
        if (const auto* text = std::get_if<TextPart>(&part)) {
          content.push_back({{"type", "text"}, {"text", text->text}});
        } else if (const auto* image = std::get_if<ImagePart>(&part)) {
          content.push_back(
              {{"type", "image_url"}, {"image_url", {{"url", "data:" + image->mime + ";base64," + image->base64}}}});
        } else if (const auto* video = std::get_if<VideoUrlPart>(&part)) {
          content.push_back({{"type", "video_url"}, {"video_url", {{"url", video->url}}}});
        }
      }
    }
    messages.push_back({{"role", to_string(msg.role)}, {"content", std::move(content)}});
  }
  return json{{"model", req.model_id},
              {"messages", std::move(messages)},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens}};
}

ChatResponse parse_wire_response(std::string_view body, const std::string& fallback_model) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw TransientFailure(200, std::string("unparseable completion body: ") + e.what());
  }
  ChatResponse resp;
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) throw EmptyCompletion();
  const json& message = (*choices)[0].value("message", json::object());
  const auto content = message.find("content");
  if (content != message.end()) {
    if (content->is_string()) {
      resp.text = content->get<std::string>();
    } else if (content->is_array()) {
      for (const auto& part : *content) {
        if (part.value("type", "") == "text") resp.text += part.value("text", "");
      }
    }
  }
  if (blank(resp.text)) throw EmptyCompletion();
  resp.model_id = j.contains("model") && j["model"].is_string() ? j["model"].get<std::string>() : fallback_model;
  if (const auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
    resp.usage.prompt_tokens = usage->value("prompt_tokens", 0L);
    resp.usage.completion_tokens = usage->value("completion_tokens", 0L);
    resp.usage.total_tokens = usage->value("total_tokens", resp.usage.prompt_tokens + resp.usage.completion_tokens);
  }
  return resp;
}

json response_to_json(const ChatResponse& resp) {
  return json{{"text", resp.text},
              {"model_id", resp.model_id},
              {"usage",
               {{"prompt_tokens", resp.usage.prompt_tokens},
                {"completion_tokens", resp.usage.completion_tokens},
                {"total_tokens", resp.usage.total_tokens}}},
              {"latency_ms", resp.latency_ms}};
}

ChatResponse response_from_json(const json& j) {
  ChatResponse resp;
  resp.text = j.at("text").get<std::string>();
  resp.model_id = j.value("model_id", "");
  if (const auto usage = j.find("usage"); usage != j.end()) {
    resp.usage.prompt_tokens = usage->value("prompt_tokens", 0L);
    resp.usage.completion_tokens = usage->value("completion_tokens", 0L);
    resp.usage.total_tokens = usage->value("total_tokens", 0L);
  }
  resp.latency_ms = j.value("latency_ms", 0.0);
  return resp;
}

// ---------------------------------------------------------------------------

HttpResponse SentinelTransport::post(const std::string& url, const Headers&, const std::string&,
                                     std::chrono::seconds) {
  ++attempts_;
  throw TransportError("network access is disabled (attempted POST " + url + ")");
}

HttpChatBackend::HttpChatBackend(std::shared_ptr<Transport> transport, std::string api_key,
                                 std::chrono::seconds timeout)
    : transport_(std::move(transport)), api_key_(std::move(api_key)), timeout_(timeout) {}

ChatResponse HttpChatBackend::complete(const ChatRequest& req) {
  if (req.endpoint.empty()) throw Error("no endpoint configured for " + std::string(to_string(req.kind)));
  std::string url = req.endpoint;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  Headers headers{{"Content-Type", "application/json"}};
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

  HttpResponse http;
  try {
    http = transport_->post(url, headers, wire_body(req).dump(), timeout_);
  } catch (const TransportError& e) {
    throw TransientFailure(0, e.what());
  }
  if (http.status == 429 || http.status >= 500) throw TransientFailure(http.status, http.body.substr(0, 512));
  if (http.status < 200 || http.status >= 300) throw RemoteRefusal(http.status, http.body);
  return parse_wire_response(http.body, req.model_id);
}

std::string api_key_from_env(EndpointKind kind) {
  const char* value = std::getenv(kind == EndpointKind::kVlmm ? "VPC_VLMM_API_KEY" : "VPC_LLM_API_KEY");
  return value ? value : "";
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::string ResponseCache::path_for(const std::string& key) const {
  return (fs::path(dir_) / key.substr(0, 2) / (key + ".json")).string();
}

std::optional<ChatResponse> ResponseCache::get(const std::string& key) const {
  std::ifstream in(path_for(key));
  if (!in) return std::nullopt;
  try {
    const json entry = json::parse(in);
    if (entry.value("key", "") != key) return std::nullopt;
    ChatResponse resp = response_from_json(entry.at("response"));
    resp.from_cache = true;
    return resp;
  } catch (const std::exception&) {
    // Unreadable entries count as misses and are overwritten on the next put.
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const ChatResponse& resp, const ChatRequest& req) const {
  const fs::path target = path_for(key);
  fs::create_directories(target.parent_path());
  json request = canonical_request(req);
  const json entry{{"key", key}, {"created_at", utc_timestamp()}, {"request", std::move(request)},
                   {"response", response_to_json(resp)}};
  std::ostringstream tmp_name;
  tmp_name << target.filename().string() << ".tmp." << ::getpid() << '.' << std::this_thread::get_id();
  const fs::path tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << entry.dump(2) << '\n';
    if (!out.flush()) throw Error("cannot write cache entry " + tmp.string());
  }
  fs::rename(tmp, target);
}

// ---------------------------------------------------------------------------

ChatClient::ChatClient(std::shared_ptr<ChatBackend> backend, std::shared_ptr<const ResponseCache> cache,
                       RetryPolicy policy, int max_in_flight)
    : backend_(std::move(backend)),
      cache_(std::move(cache)),
      policy_(policy),
      in_flight_(std::clamp(max_in_flight, 1, 1024)) {}

ChatResponse ChatClient::chat(const ChatRequest& req) { return chat(req, policy_); }

ChatResponse ChatClient::chat(const ChatRequest& req, const RetryPolicy& policy) {
  check_request(req);
  ++requests_;
  const std::string key = cache_key(req);
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      ++cache_hits_;
      return *hit;
    }
  }

  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(-policy.jitter, policy.jitter);

  int retries = 0;
  while (true) {
    try {
      const auto start = std::chrono::steady_clock::now();
      ChatResponse resp;
      {
        in_flight_.acquire();
        struct Release {
          std::counting_semaphore<1024>& s;
          ~Release() { s.release(); }
        } release{in_flight_};
        ++backend_calls_;
        resp = backend_->complete(req);
      }
      if (blank(resp.text)) throw EmptyCompletion();
      resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      resp.retries = retries;
      resp.from_cache = false;
      if (cache_) cache_->put(key, resp, req);
      return resp;
    } catch (const TransientFailure& e) {
      if (retries >= policy.max_retries) {
        throw TransportError(std::string(e.what()) + " (gave up after " + std::to_string(retries) + " retries)");
      }
      const double exp = std::min(static_cast<double>(policy.max_delay.count()),
                                  static_cast<double>(policy.base_delay.count()) * std::pow(2.0, retries));
      const double delay = std::max(0.0, exp * (1.0 + jitter(rng)));
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
      ++retries;
      ++retries_;
    }
  }
}

ClientStats ChatClient::stats() const {
  return ClientStats{requests_.load(), cache_hits_.load(), backend_calls_.load(), retries_.load()};
}

}  // namespace vpc::model
