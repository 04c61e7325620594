#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vpc/error.hpp"

namespace vpc::model {

enum class EndpointKind { kVlmm, kLlm };
const char* to_string(EndpointKind kind);

enum class Role { kSystem, kUser };
const char* to_string(Role role);

struct TextPart {
  std::string text;
};

// Inline image, already base64 encoded.
struct ImagePart {
  std::string mime;
  std::string base64;
};

// Locator handed to servers that accept whole videos.
struct VideoUrlPart {
  std::string url;
};

using ContentPart = std::variant<TextPart, ImagePart, VideoUrlPart>;

struct Message {
  Role role = Role::kUser;
  std::vector<ContentPart> parts;
};

// Routing hints for mock backends and diagnostics. Never sent over the wire
// and never part of the cache key.
struct RequestMeta {
  std::string clip_id;
  std::string template_id;
  std::map<std::string, std::string> vars;
};

inline constexpr int kDefaultMaxTokens = 1024;

struct ChatRequest {
  EndpointKind kind = EndpointKind::kLlm;
  std::string endpoint;
  std::string model_id;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = kDefaultMaxTokens;
  std::string template_hash;
  RequestMeta meta;
};

struct Usage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
  long total_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::string model_id;
  Usage usage;
  double latency_ms = 0.0;
  bool from_cache = false;
  int retries = 0;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& detail) : Error("transport failure: " + detail) {}
};

class RemoteRefusal : public Error {
 public:
  RemoteRefusal(int status, std::string body)
      : Error("remote refused request with HTTP " + std::to_string(status) + ": " + body.substr(0, 512)),
        status_(status),
        body_(std::move(body)) {}
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

class EmptyCompletion : public Error {
 public:
  EmptyCompletion() : Error("model returned an empty completion") {}
};

// Raised by a backend for failures worth retrying (timeouts, 429, 5xx).
class TransientFailure : public Error {
 public:
  TransientFailure(int status, const std::string& detail)
      : Error("transient failure" + (status ? " (HTTP " + std::to_string(status) + ")" : std::string()) + ": " +
              detail),
        status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

// Request validity: at least one message and a model id.
void check_request(const ChatRequest& req);

// Logical content of the request with frames replaced by their digests.
nlohmann::json canonical_request(const ChatRequest& req);
// SHA-256 hex over the canonical request; stable across processes.
std::string cache_key(const ChatRequest& req);

// Full round-trippable serialisation (includes endpoint and image data).
nlohmann::json request_to_json(const ChatRequest& req);
ChatRequest request_from_json(const nlohmann::json& j);

// OpenAI-compatible chat-completions request body.
nlohmann::json wire_body(const ChatRequest& req);
// Reads choices[0].message.content; throws EmptyCompletion for blank text.
ChatResponse parse_wire_response(std::string_view body, const std::string& fallback_model);

nlohmann::json response_to_json(const ChatResponse& resp);
ChatResponse response_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransportError when no HTTP response was obtained.
  virtual HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                            std::chrono::seconds timeout) = 0;
};

// Plain HTTP(S) via cpp-httplib.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                    std::chrono::seconds timeout) override;
};

// Refuses every call and counts the attempts. Installed where the network
// must stay untouched.
class SentinelTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                    std::chrono::seconds timeout) override;
  std::size_t attempts() const { return attempts_.load(); }

 private:
  std::atomic<std::size_t> attempts_{0};
};

// ---------------------------------------------------------------------------
// Backends perform exactly one attempt; retrying is the client's job.

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

class HttpChatBackend final : public ChatBackend {
 public:
  HttpChatBackend(std::shared_ptr<Transport> transport, std::string api_key,
                  std::chrono::seconds timeout = std::chrono::seconds(120));
  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::shared_ptr<Transport> transport_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// Reads VPC_LLM_API_KEY or VPC_VLMM_API_KEY; empty when unset.
std::string api_key_from_env(EndpointKind kind);

// ---------------------------------------------------------------------------
// Cache

// One JSON file per entry at <dir>/<first-2-hex>/<digest>.json. Writes go to
// a temporary file and are renamed into place, so concurrent writers of the
// same key converge on identical content.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);

  std::optional<ChatResponse> get(const std::string& key) const;
  void put(const std::string& key, const ChatResponse& resp, const ChatRequest& req) const;
  std::string path_for(const std::string& key) const;
  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
};

// ---------------------------------------------------------------------------
// Client

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{20000};
  double jitter = 0.25;  // +/- fraction of the computed delay
};

struct ClientStats {
  std::size_t requests = 0;
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
  std::size_t retries = 0;
};

class ChatClient {
 public:
  ChatClient(std::shared_ptr<ChatBackend> backend, std::shared_ptr<const ResponseCache> cache,
             RetryPolicy policy = {}, int max_in_flight = 16);

  ChatResponse chat(const ChatRequest& req);
  ChatResponse chat(const ChatRequest& req, const RetryPolicy& policy);

  ClientStats stats() const;

 private:
  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<const ResponseCache> cache_;
  RetryPolicy policy_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> retries_{0};
};

}  // namespace vpc::model
