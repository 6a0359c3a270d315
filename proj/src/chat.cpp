#include "ccvqa/chat.hpp"

#include <algorithm>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::clients {

using nlohmann::json;

ChatRequest ChatRequest::user_prompt(const std::string& prompt, const std::string& image_ref) {
  ChatRequest req;
  ChatMessage msg;
  msg.role = Role::user;
  if (!image_ref.empty()) msg.parts.push_back({PartKind::image_ref, image_ref});
  msg.parts.push_back({PartKind::text, prompt});
  req.messages.push_back(std::move(msg));
  return req;
}

void ChatRequest::validate() const {
  const bool has_user = std::any_of(messages.begin(), messages.end(),
                                    [](const ChatMessage& m) { return m.role == Role::user; });
  if (!has_user) throw PipelineError("chat request needs at least one user message");
  if (!(temperature >= 0.0)) throw PipelineError("chat temperature must be >= 0");
  if (max_tokens <= 0) throw PipelineError("chat max_tokens must be positive");
}

std::string ChatRequest::text() const {
  std::string out;
  for (const auto& m : messages) {
    for (const auto& p : m.parts) {
      if (p.kind != PartKind::text) continue;
      if (!out.empty()) out.push_back('\n');
      out += p.payload;
    }
  }
  return out;
}

json to_json(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    json parts = json::array();
    for (const auto& p : m.parts) {
      parts.push_back({{"kind", p.kind == PartKind::text ? "text" : "image_ref"},
                       {"payload", p.payload}});
    }
    messages.push_back({{"role", m.role == Role::user ? "user" : "system"}, {"parts", parts}});
  }
  json j = {{"messages", messages},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  j["seed"] = request.seed ? json(*request.seed) : json(nullptr);
  return j;
}

StubScript StubScript::from_json(const json& j) {
  StubScript s;
  if (j.contains("rules")) {
    for (const auto& r : j.at("rules")) {
      s.rules.push_back({r.at("match").get<std::string>(), r.at("response").get<std::string>()});
    }
  }
  s.fallback = j.value("fallback", std::string{});
  return s;
}

json StubScript::to_json() const {
  json rules = json::array();
  for (const auto& r : this->rules) rules.push_back({{"match", r.match}, {"response", r.response}});
  return {{"rules", rules}, {"fallback", fallback}};
}

StubChatClient::StubChatClient(StubScript script) : script_(std::move(script)) {}

std::string StubChatClient::chat(const ChatRequest& request) const {
  request.validate();
  const std::string text = request.text();
  for (const auto& rule : script_.rules) {
    if (contains(text, rule.match)) return rule.response;
  }
  return script_.fallback;
}

}  // namespace ccvqa::clients
