#include "ccvqa/scenario_lm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::lm {

ScenarioLMConfig ScenarioLMConfig::from_json(const nlohmann::json& j) {
  ScenarioLMConfig c;
  try {
    c.candidates = j.at("candidates").get<std::vector<std::string>>();
    for (const auto& p : j.value("priors", nlohmann::json::array())) {
      c.priors.push_back({p.at("trigger").get<std::string>(), p.at("answer").get<std::string>(),
                          p.at("strength").get<double>()});
    }
    if (j.contains("image_attributes")) {
      c.image_attributes = j.at("image_attributes").get<std::map<std::string, std::vector<std::string>>>();
    }
    c.feature_gain = j.value("feature_gain", c.feature_gain);
    c.floor_logit = j.value("floor_logit", c.floor_logit);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario LM config: ") + e.what());
  }
  return c;
}

nlohmann::json ScenarioLMConfig::to_json() const {
  nlohmann::json priors_json = nlohmann::json::array();
  for (const auto& p : priors) {
    priors_json.push_back({{"trigger", p.trigger}, {"answer", p.answer}, {"strength", p.strength}});
  }
  return {{"candidates", candidates},      {"priors", priors_json}, {"image_attributes", image_attributes},
          {"feature_gain", feature_gain}, {"floor_logit", floor_logit}};
}

ScenarioLM::ScenarioLM(ScenarioLMConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.candidates.empty()) throw ConfigError("scenario LM needs at least one candidate");
  for (const auto& c : cfg_.candidates) {
    if (c.empty() || c.find('\0') != std::string::npos) throw ConfigError("invalid scenario candidate");
  }
  for (const auto& p : cfg_.priors) {
    if (std::find(cfg_.candidates.begin(), cfg_.candidates.end(), p.answer) == cfg_.candidates.end()) {
      throw ConfigError("prior answer " + p.answer + " is not a candidate");
    }
  }
}

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// [begin, end) of the sentence holding each context byte; npos elsewhere.
struct SentenceSpans {
  std::vector<std::size_t> begin;
  std::vector<std::size_t> end;
};

SentenceSpans context_sentences(const std::string& text, const std::vector<Region>& regions) {
  const std::size_t n = text.size();
  SentenceSpans spans{std::vector<std::size_t>(n, std::string::npos), std::vector<std::size_t>(n, std::string::npos)};
  std::size_t i = 0;
  while (i < n) {
    if (regions[i] != Region::context) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < n && regions[run_end] == Region::context) ++run_end;
    std::size_t start = i;
    for (std::size_t j = i; j < run_end; ++j) {
      const bool boundary = is_terminator(text[j]) &&
                            (j + 1 == run_end || std::isspace(static_cast<unsigned char>(text[j + 1])));
      if (boundary || j + 1 == run_end) {
        for (std::size_t b = start; b <= j; ++b) {
          spans.begin[b] = start;
          spans.end[b] = j + 1;
        }
        start = j + 1;
      }
    }
    i = run_end;
  }
  return spans;
}

}  // namespace

std::map<std::string, double> ScenarioLM::evidence(std::span<const TokenId> tokens,
                                                   const PositionMap& positions) const {
  if (positions.size() != tokens.size()) throw ShapeError("position map length differs from token count");
  const std::string text = bytes::decode(tokens);
  const auto& regions = positions.regions;

  std::string rvis;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (regions[i] == Region::rvis) rvis.push_back(text[i]);
  }
  std::vector<std::string> attributes;
  for (const auto& [image, attrs] : cfg_.image_attributes) {
    if (!contains(text, image)) continue;
    for (const auto& a : attrs) {
      if (contains(rvis, a)) attributes.push_back(a);
    }
  }
  const SentenceSpans spans = context_sentences(text, regions);

  std::map<std::string, double> z;
  for (const auto& c : cfg_.candidates) {
    double score = 0.0;
    std::size_t at = text.find(c);
    while (at != std::string::npos) {
      double steps = 0.0;
      for (std::size_t j = at; j < at + c.size(); ++j) {
        steps += j == 0 ? 1.0 : positions.positions[j] - positions.positions[j - 1];
      }
      double mass = steps / static_cast<double>(c.size());
      if (regions[at] == Region::context && spans.begin[at] != std::string::npos) {
        const std::string_view sentence(text.data() + spans.begin[at], spans.end[at] - spans.begin[at]);
        const bool featured = std::any_of(attributes.begin(), attributes.end(),
                                          [&](const std::string& a) { return contains(sentence, a); });
        if (featured) mass *= 1.0 + cfg_.feature_gain;
      }
      score += mass;
      at = text.find(c, at + c.size());
    }
    z[c] = score;
  }
  for (const auto& p : cfg_.priors) {
    if (contains(text, p.trigger)) z[p.answer] += p.strength;
  }
  return z;
}

Logits ScenarioLM::next_token_logits(std::span<const TokenId> tokens, const PositionMap& positions) const {
  if (positions.size() != tokens.size()) throw ShapeError("position map length differs from token count");
  std::size_t prompt_len = tokens.size();
  while (prompt_len > 0 && positions.regions[prompt_len - 1] == Region::generated) --prompt_len;
  for (std::size_t i = 0; i < prompt_len; ++i) {
    if (positions.regions[i] == Region::generated) throw MappingError("generated tokens must form a suffix");
  }
  PositionMap prompt_pos{{positions.positions.begin(), positions.positions.begin() + prompt_len},
                         {positions.regions.begin(), positions.regions.begin() + prompt_len}};
  const auto z = evidence(tokens.first(prompt_len), prompt_pos);
  const std::string generated = bytes::decode(tokens.subspan(prompt_len));

  Logits logits(bytes::kVocab, cfg_.floor_logit);
  std::vector<bool> set(bytes::kVocab, false);
  bool any = false;
  for (const auto& c : cfg_.candidates) {
    if (c.size() < generated.size() || c.compare(0, generated.size(), generated) != 0) continue;
    const double score = z.at(c);
    const std::size_t slot = c.size() == generated.size()
                                 ? bytes::kEos
                                 : static_cast<unsigned char>(c[generated.size()]);
    logits[slot] = set[slot] ? std::max(logits[slot], score) : score;
    set[slot] = true;
    any = true;
  }
  if (!any) logits[bytes::kEos] = 0.0;
  return logits;
}

}  // namespace ccvqa::lm
