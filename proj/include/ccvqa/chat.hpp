#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ccvqa::clients {

enum class Role { system, user };
enum class PartKind { text, image_ref };

struct ContentPart {
  PartKind kind = PartKind::text;
  std::string payload;
};

struct ChatMessage {
  Role role = Role::user;
  std::vector<ContentPart> parts;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed = 0;

  // A single user turn: optional image followed by the prompt text.
  static ChatRequest user_prompt(const std::string& prompt, const std::string& image_ref = {});

  // Throws PipelineError unless there is a user message, temperature >= 0
  // and max_tokens > 0.
  void validate() const;

  // Text parts joined by newlines; what stub rules match against.
  std::string text() const;
};

nlohmann::json to_json(const ChatRequest& request);

// The vision-language chat role.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string chat(const ChatRequest& request) const = 0;
};

struct StubRule {
  std::string match;
  std::string response;
};

struct StubScript {
  std::vector<StubRule> rules;
  std::string fallback;

  // {"rules": [{"match": str, "response": str}], "fallback": str}
  static StubScript from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Scripted chat model: the first rule whose `match` is a substring of the
// request text answers; otherwise the fallback.
class StubChatClient final : public ChatClient {
 public:
  explicit StubChatClient(StubScript script);
  std::string chat(const ChatRequest& request) const override;

  const StubScript& script() const { return script_; }

 private:
  StubScript script_;
};

}  // namespace ccvqa::clients
