#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccvqa/language_model.hpp"

namespace ccvqa::lm {

struct ScenarioPrior {
  std::string trigger;  // substring of the prompt that activates the prior
  std::string answer;
  double strength = 0.0;
};

struct ScenarioLMConfig {
  std::vector<std::string> candidates;
  std::vector<ScenarioPrior> priors;
  std::map<std::string, std::vector<std::string>> image_attributes;  // image ref -> visual attributes
  double feature_gain = 1.5;
  double floor_logit = -8.0;

  static ScenarioLMConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Scripted byte-level model for deterministic end-to-end runs.
//
// Every candidate answer gets an evidence score
//   z(c) = sum over mentions of c in the prompt of (mean position step over
//          the mention, times 1 + feature_gain when the mention's sentence
//          holds an image attribute that the R_vis region also names)
//        + strengths of triggered priors for c.
// A mention inside a compressed sentence therefore weighs alpha instead of 1.
// The next-byte logit is the best z among candidates that extend the bytes
// generated so far; a completed candidate puts its z on end-of-sequence and
// every other byte gets floor_logit.
class ScenarioLM : public LanguageModel {
 public:
  explicit ScenarioLM(ScenarioLMConfig cfg);

  std::size_t vocab_size() const override { return bytes::kVocab; }
  TokenId eos_token() const override { return bytes::kEos; }
  Logits next_token_logits(std::span<const TokenId> tokens, const PositionMap& positions) const override;

  // Evidence score of every candidate for a prompt without generated tokens.
  std::map<std::string, double> evidence(std::span<const TokenId> tokens, const PositionMap& positions) const;

  const ScenarioLMConfig& config() const { return cfg_; }

 private:
  ScenarioLMConfig cfg_;
};

}  // namespace ccvqa::lm
