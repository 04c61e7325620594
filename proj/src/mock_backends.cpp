#include "vpc/mock_backends.hpp"

#include <fstream>

namespace vpc::model {

using nlohmann::json;

std::string prompt_text(const ChatRequest& req) {
  std::string out;
  for (const auto& msg : req.messages) {
    for (const auto& part : msg.parts) {
      if (const auto* text = std::get_if<TextPart>(&part)) {
        if (!out.empty()) out.push_back('\n');
        out += text->text;
      }
    }
  }
  return out;
}

MockScript parse_mock_script(const json& j) {
  MockScript script;
  if (!j.is_object()) throw Error("mock script must be a JSON object");
  const std::string fallback = j.value("fallback", "identity");
  if (fallback == "identity") {
    script.fallback = MockMode::kIdentity;
  } else if (fallback == "oracle") {
    script.fallback = MockMode::kOracle;
  } else {
    throw Error("mock script fallback must be identity or oracle");
  }
  for (const auto& r : j.value("rules", json::array())) {
    MockRule rule;
    if (r.contains("endpoint")) {
      const std::string e = r["endpoint"].get<std::string>();
      if (e == "vlmm") {
        rule.endpoint = EndpointKind::kVlmm;
      } else if (e == "llm") {
        rule.endpoint = EndpointKind::kLlm;
      } else {
        throw Error("mock rule endpoint must be vlmm or llm");
      }
    }
    if (r.contains("template")) rule.template_id = r["template"].get<std::string>();
    if (r.contains("clip_id")) rule.clip_id = r["clip_id"].get<std::string>();
    if (r.contains("contains")) rule.contains = r["contains"].get<std::string>();
    if (r.contains("response")) rule.response = r["response"].get<std::string>();
    if (r.contains("error")) rule.error = r["error"].get<std::string>();
    for (const auto& rep : r.value("replace", json::array())) {
      auto from = rep.at("from").get<std::string>();
      if (from.empty()) throw Error("mock replace rule has an empty 'from'");
      rule.replace.emplace_back(std::move(from), rep.at("to").get<std::string>());
    }
    const int actions = (rule.response ? 1 : 0) + (rule.replace.empty() ? 0 : 1) + (rule.error ? 1 : 0);
    if (actions != 1) throw Error("each mock rule needs exactly one of response, replace, error");
    script.rules.push_back(std::move(rule));
  }
  return script;
}

MockScript load_mock_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mock script '" + path + "'");
  try {
    return parse_mock_script(json::parse(in));
  } catch (const json::exception& e) {
    throw Error("bad mock script '" + path + "': " + e.what());
  }
}

MockBackend::MockBackend(MockMode mode, std::map<std::string, std::string> references, MockScript script)
    : mode_(mode), references_(std::move(references)), script_(std::move(script)) {}

std::size_t MockBackend::calls(EndpointKind kind) const {
  return kind == EndpointKind::kVlmm ? vlmm_calls_.load() : llm_calls_.load();
}

ChatResponse MockBackend::answer(MockMode mode, const ChatRequest& req) const {
  ChatResponse resp;
  resp.model_id = req.model_id;
  if (req.kind == EndpointKind::kVlmm) {
    resp.text = req.meta.template_id == "p1_show_recognition" ? kMockShowAnswer : kMockDescriptionAnswer;
    return resp;
  }
  if (mode == MockMode::kOracle) {
    const auto it = references_.find(req.meta.clip_id);
    if (it == references_.end()) throw Error("oracle mock has no reference for clip '" + req.meta.clip_id + "'");
    resp.text = it->second;
    return resp;
  }
  const auto it = req.meta.vars.find("hypothesis");
  resp.text = it == req.meta.vars.end() ? std::string() : it->second;
  return resp;
}

ChatResponse MockBackend::complete(const ChatRequest& req) {
  ++calls_;
  ++(req.kind == EndpointKind::kVlmm ? vlmm_calls_ : llm_calls_);
  if (mode_ != MockMode::kScripted) return answer(mode_, req);

  const std::string prompt = prompt_text(req);
  for (const auto& rule : script_.rules) {
    if (rule.endpoint && *rule.endpoint != req.kind) continue;
    if (rule.template_id && *rule.template_id != req.meta.template_id) continue;
    if (rule.clip_id && *rule.clip_id != req.meta.clip_id) continue;
    if (rule.contains && prompt.find(*rule.contains) == std::string::npos) continue;

    ChatResponse resp;
    resp.model_id = req.model_id;
    if (rule.error) {
      if (*rule.error == "empty") return resp;
      if (*rule.error == "refusal") throw RemoteRefusal(400, "scripted refusal");
      throw TransientFailure(0, "scripted transport failure");
    }
    if (rule.response) {
      resp.text = *rule.response;
      return resp;
    }
    const auto it = req.meta.vars.find("hypothesis");
    std::string text = it == req.meta.vars.end() ? std::string() : it->second;
    for (const auto& [from, to] : rule.replace) {
      for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
        text.replace(pos, from.size(), to);
      }
    }
    resp.text = std::move(text);
    return resp;
  }
  return answer(script_.fallback, req);
}

}  // namespace vpc::model
