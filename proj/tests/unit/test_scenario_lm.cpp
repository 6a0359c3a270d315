#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "ccvqa/errors.hpp"
#include "ccvqa/scenario_lm.hpp"

using namespace ccvqa;
using namespace ccvqa::lm;
using Catch::Matchers::WithinAbs;

namespace {

struct Built {
  std::vector<TokenId> tokens;
  PositionMap positions;

  Built& add(const std::string& text, Region region, double step = 1.0) {
    for (const auto t : bytes::encode(text)) {
      tokens.push_back(t);
      positions.append(region, step);
    }
    return *this;
  }
};

ScenarioLMConfig config() {
  ScenarioLMConfig c;
  c.candidates = {"Amanita", "Agaricus", "Russula"};
  c.priors = {{"ring", "Agaricus", 0.7}};
  c.image_attributes = {{"img/m.jpg", {"white spots"}}};
  return c;
}

}  // namespace

TEST_CASE("config validation and json round trip", "[scenario_lm]") {
  CHECK_THROWS_AS(ScenarioLM(ScenarioLMConfig{}), ConfigError);
  auto c = config();
  c.priors.push_back({"x", "Boletus", 1.0});
  CHECK_THROWS_AS(ScenarioLM(c), ConfigError);
  const auto back = ScenarioLMConfig::from_json(config().to_json());
  CHECK(back.candidates == config().candidates);
  CHECK(back.priors.size() == 1);
  CHECK(back.feature_gain == 1.5);
  CHECK_THROWS_AS(ScenarioLMConfig::from_json(nlohmann::json{{"priors", 3}}), ConfigError);
}

TEST_CASE("mention mass follows the position step", "[scenario_lm]") {
  const ScenarioLM lm(config());
  Built full;
  full.add("Q: ", Region::query).add("It is Amanita. Russula too.", Region::context);
  auto z = lm.evidence(full.tokens, full.positions);
  CHECK_THAT(z["Amanita"], WithinAbs(1.0, 1e-12));
  CHECK_THAT(z["Russula"], WithinAbs(1.0, 1e-12));
  CHECK(z["Agaricus"] == 0.0);

  Built low;
  low.add("Q: ", Region::query).add("It is Amanita.", Region::context, 0.3).add(" Russula too.", Region::context);
  z = lm.evidence(low.tokens, low.positions);
  CHECK_THAT(z["Amanita"], WithinAbs(0.3, 1e-12));
  CHECK_THAT(z["Russula"], WithinAbs(1.0, 1e-12));
}

TEST_CASE("attributes named in the rationale boost matching sentences", "[scenario_lm]") {
  const ScenarioLM lm(config());
  Built b;
  b.add("Image: img/m.jpg\n", Region::query)
      .add("white spots", Region::rvis)
      .add("\n", Region::query)
      .add("Amanita has white spots. Russula is red.", Region::context);
  auto z = lm.evidence(b.tokens, b.positions);
  CHECK_THAT(z["Amanita"], WithinAbs(2.5, 1e-12));
  CHECK_THAT(z["Russula"], WithinAbs(1.0, 1e-12));

  Built no_rvis;
  no_rvis.add("Image: img/m.jpg\n", Region::query).add("Amanita has white spots.", Region::context);
  CHECK_THAT(lm.evidence(no_rvis.tokens, no_rvis.positions)["Amanita"], WithinAbs(1.0, 1e-12));
}

TEST_CASE("priors fire on their trigger", "[scenario_lm]") {
  const ScenarioLM lm(config());
  Built b;
  b.add("a ring on the stem", Region::query);
  CHECK_THAT(lm.evidence(b.tokens, b.positions)["Agaricus"], WithinAbs(0.7, 1e-12));
}

TEST_CASE("next-byte logits spell out candidates", "[scenario_lm]") {
  const ScenarioLM lm(config());
  Built b;
  b.add("Amanita. Amanita. Agaricus.", Region::context);
  auto logits = lm.next_token_logits(b.tokens, b.positions);
  CHECK_THAT(logits['A'], WithinAbs(2.0, 1e-12));  // max over Amanita and Agaricus
  CHECK_THAT(logits['R'], WithinAbs(0.0, 1e-12));
  CHECK(logits['x'] == -8.0);
  CHECK(logits[bytes::kEos] == -8.0);

  b.add("Ag", Region::generated);
  logits = lm.next_token_logits(b.tokens, b.positions);
  CHECK_THAT(logits['a'], WithinAbs(1.0, 1e-12));
  CHECK(logits['m'] == -8.0);

  b.add("aricus", Region::generated);
  logits = lm.next_token_logits(b.tokens, b.positions);
  CHECK_THAT(logits[bytes::kEos], WithinAbs(1.0, 1e-12));

  b.add("!", Region::generated);
  logits = lm.next_token_logits(b.tokens, b.positions);
  CHECK(logits[bytes::kEos] == 0.0);
}

TEST_CASE("generated tokens must be a suffix", "[scenario_lm]") {
  const ScenarioLM lm(config());
  Built b;
  b.add("A", Region::generated).add("x", Region::query);
  CHECK_THROWS_AS(lm.next_token_logits(b.tokens, b.positions), MappingError);
  PositionMap short_map;
  short_map.append(Region::query);
  CHECK_THROWS_AS(lm.next_token_logits(b.tokens, short_map), ShapeError);
}
