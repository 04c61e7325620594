#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpc/model_client.hpp"

namespace vpc::model {

// Offline stand-ins for the VLMM and LLM endpoints. They answer from the
// request metadata (template id, clip id, render variables) and never touch
// the network.
//
// identity: VLMM answers with fixed placeholder context, LLM echoes the
//           hypothesis.
// oracle:   as identity, except the LLM returns the clip's reference.
// scripted: ordered rules from a fixture file, falling back to identity or
//           oracle behaviour.
enum class MockMode { kIdentity, kOracle, kScripted };

inline constexpr const char* kMockShowAnswer = "unknown";
inline constexpr const char* kMockDescriptionAnswer = "No description available.";

struct MockRule {
  std::optional<EndpointKind> endpoint;
  std::optional<std::string> template_id;
  std::optional<std::string> clip_id;
  std::optional<std::string> contains;  // substring of the prompt text

  // Exactly one action applies.
  std::optional<std::string> response;
  std::vector<std::pair<std::string, std::string>> replace;  // applied to the hypothesis
  std::optional<std::string> error;                          // "empty" | "transport" | "refusal"
};

struct MockScript {
  std::vector<MockRule> rules;
  MockMode fallback = MockMode::kIdentity;
};

MockScript parse_mock_script(const nlohmann::json& j);
MockScript load_mock_script(const std::string& path);

class MockBackend final : public ChatBackend {
 public:
  // `references` maps clip id to reference transcript; used by oracle mode.
  MockBackend(MockMode mode, std::map<std::string, std::string> references = {}, MockScript script = {});

  ChatResponse complete(const ChatRequest& req) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t calls(EndpointKind kind) const;

 private:
  ChatResponse answer(MockMode mode, const ChatRequest& req) const;

  MockMode mode_;
  std::map<std::string, std::string> references_;
  MockScript script_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> vlmm_calls_{0};
  std::atomic<std::size_t> llm_calls_{0};
};

// Concatenated text parts of every message.
std::string prompt_text(const ChatRequest& req);

}  // namespace vpc::model
