#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "ccvqa/decoding.hpp"
#include "ccvqa/errors.hpp"

using namespace ccvqa;
using namespace ccvqa::decoding;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Three-token vocabulary. Token 9 at the head of a prompt marks the parametric pass.
class TableLM final : public lm::LanguageModel {
 public:
  std::map<std::size_t, lm::Logits> contextual;
  std::map<std::size_t, lm::Logits> parametric;
  std::size_t prompt_len = 1;

  std::size_t vocab_size() const override { return 3; }
  lm::TokenId eos_token() const override { return 0; }
  lm::Logits next_token_logits(std::span<const lm::TokenId> tokens, const lm::PositionMap& pos) const override {
    if (tokens.size() != pos.size()) throw ShapeError("length");
    const std::size_t step = tokens.size() - prompt_len;
    const auto& table = tokens.front() == 9 ? parametric : contextual;
    const auto it = table.find(step);
    return it == table.end() ? lm::Logits{0.0, 1.0, 0.0} : it->second;
  }
};

Prompt prompt(lm::TokenId head) {
  Prompt p;
  p.tokens.push_back(head);
  p.positions.append(lm::Region::query);
  return p;
}

Distribution random_dist(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> z(0.0, 3.0);
  std::vector<double> l(n);
  for (auto& x : l) x = z(rng);
  return softmax(l);
}

}  // namespace

TEST_CASE("softmax is normalized and shift invariant", "[decoding]") {
  const std::vector<double> z{1.0, 2.0, 3.0};
  const auto p = softmax(z);
  CHECK_THAT(p[0] + p[1] + p[2], WithinAbs(1.0, 1e-15));
  const std::vector<double> shifted{1001.0, 1002.0, 1003.0};
  const auto q = softmax(shifted);
  for (int i = 0; i < 3; ++i) CHECK_THAT(q[i], WithinAbs(p[i], 1e-14));
  const std::vector<double> bad{1.0, NAN};
  CHECK_THROWS_AS(softmax(bad), NumericError);
  CHECK_THROWS_AS(softmax(std::vector<double>{}), NumericError);
}

TEST_CASE("divergence hand values", "[decoding]") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{0.0, 1.0};
  const std::vector<double> h{0.5, 0.5};
  CHECK_THAT(divergence(a, b), WithinAbs(1.0, 1e-12));
  CHECK(divergence(a, a) == 0.0);
  CHECK_THAT(divergence(h, a), WithinAbs(0.75 * std::log(4.0 / 3.0) / std::log(2.0), 1e-12));
  CHECK_THROWS_AS(divergence(a, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("divergence is symmetric and bounded", "[decoding][property]") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng() % 50;
    const auto p = random_dist(rng, n);
    const auto q = random_dist(rng, n);
    const double d = divergence(p, q);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK_THAT(d, WithinAbs(divergence(q, p), 1e-12));
    CHECK(divergence(p, p) < 1e-12);
  }
}

TEST_CASE("entropy gap", "[decoding]") {
  const std::vector<double> peaked{1.0, 0.0, 0.0, 0.0};
  const std::vector<double> flat{0.25, 0.25, 0.25, 0.25};
  CHECK_THAT(entropy(flat), WithinAbs(std::log(4.0), 1e-12));
  CHECK(entropy(peaked) == 0.0);
  CHECK_THAT(entropy_gap(peaked, flat), WithinAbs(1.0, 1e-12));
  CHECK_THAT(entropy_gap(flat, peaked), WithinAbs(-1.0, 1e-12));
  CHECK(entropy_gap(flat, flat) == 0.0);
}

TEST_CASE("sigmoid is stable and matches reference values", "[decoding]") {
  CHECK_THAT(sigmoid(0.1), WithinAbs(0.52497918747894, 1e-12));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK_THAT(sigmoid(-3.0) + sigmoid(3.0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(conflict_score(0.2, -0.1, 0.5, 0.1), WithinAbs(sigmoid(0.7), 1e-15));
  CHECK_THROWS_AS(conflict_score(NAN, 0, 0, 0.1), NumericError);
}

TEST_CASE("blend hand value", "[decoding]") {
  const std::vector<double> zc{2.0, 0.0, 0.0};
  const std::vector<double> zm{0.0, 2.0, 0.0};
  const auto p = blend(zc, zm, 0.5);  // softmax(3, -1, 0)
  const double norm = std::exp(3.0) + std::exp(-1.0) + 1.0;
  CHECK_THAT(p[0], WithinRel(std::exp(3.0) / norm, 1e-12));
  CHECK_THAT(p[1], WithinRel(std::exp(-1.0) / norm, 1e-12));
  CHECK_THAT(p[2], WithinRel(1.0 / norm, 1e-12));
  CHECK(blend(zc, zm, 0.0) == softmax(zc));
  CHECK_THROWS_AS(blend(zc, zm, 1.0), ParameterError);
  CHECK_THROWS_AS(blend(zc, zm, -0.1), ParameterError);
  CHECK_THROWS_AS(blend(zc, std::vector<double>{1.0}, 0.5), ShapeError);
}

TEST_CASE("two-step decode matches a hand trace", "[decoding]") {
  TableLM model;
  model.contextual[0] = {0.0, 2.0, 0.0};
  model.parametric[0] = {0.0, 0.0, 3.0};
  model.contextual[1] = {1.0, 0.0, 0.5};
  model.parametric[1] = {0.0, 1.0, 0.0};
  DecodeConfig cfg;
  cfg.max_tokens = 8;
  const auto r = decode_answer(prompt(1), prompt(9), model, 0.4, cfg);
  CHECK(r.tokens == std::vector<lm::TokenId>{1});
  CHECK(r.stopped_at_eos);
  REQUIRE(r.trace.size() == 2);
  CHECK(r.trace[1].token == 0);

  const auto pc = softmax(model.contextual[0]);
  const auto pm = softmax(model.parametric[0]);
  const double D = divergence(pc, pm);
  const double dH = (entropy(pm) - entropy(pc)) / std::log(3.0);
  REQUIRE(r.trace[0].signals);
  CHECK_THAT(r.trace[0].signals->D, WithinAbs(D, 1e-15));
  CHECK_THAT(r.trace[0].signals->dH, WithinAbs(dH, 1e-15));
  CHECK(r.trace[0].signals->K == 0.4);
  CHECK_THAT(r.trace[0].signals->s_prime, WithinAbs(1.0 / (1.0 + std::exp(-(D + dH + 0.4 + 0.1))), 1e-15));
}

TEST_CASE("contrast overturns a token the parametric pass favours", "[decoding]") {
  TableLM model;
  model.contextual[0] = {-5.0, 1.0, 0.9};
  model.parametric[0] = {-5.0, 3.0, 0.0};
  model.contextual[1] = {5.0, 0.0, 0.0};
  model.parametric[1] = {5.0, 0.0, 0.0};
  DecodeConfig cfg;
  CHECK(decode_answer(prompt(1), prompt(9), model, 0.0, cfg).tokens == std::vector<lm::TokenId>{2});
  cfg.contrast = false;
  const auto plain = decode_answer(prompt(1), prompt(9), model, 0.0, cfg);
  CHECK(plain.tokens == std::vector<lm::TokenId>{1});
  CHECK_FALSE(plain.trace[0].signals);
}

TEST_CASE("decode stops at max_tokens", "[decoding]") {
  TableLM model;
  DecodeConfig cfg;
  cfg.max_tokens = 0;
  const auto none = decode_answer(prompt(1), prompt(9), model, 0.5, cfg);
  CHECK(none.tokens.empty());
  CHECK(none.trace.empty());
  CHECK_FALSE(none.stopped_at_eos);
  cfg.max_tokens = 5;
  const auto capped = decode_answer(prompt(1), prompt(9), model, 0.5, cfg);
  CHECK(capped.tokens.size() == 5);
  CHECK_FALSE(capped.stopped_at_eos);
  CHECK(capped.trace.size() == 5);
}

TEST_CASE("decode parameter checks", "[decoding]") {
  TableLM model;
  DecodeConfig cfg;
  CHECK_THROWS_AS(decode_answer(prompt(1), prompt(9), model, 1.5, cfg), ParameterError);
  CHECK_THROWS_AS(decode_answer(prompt(1), prompt(9), model, NAN, cfg), ParameterError);
  cfg.sample = true;
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(decode_answer(prompt(1), prompt(9), model, 0.5, cfg), ParameterError);
}

TEST_CASE("sampling is reproducible per seed", "[decoding]") {
  TableLM model;
  for (std::size_t s = 0; s < 6; ++s) {
    model.contextual[s] = {0.1, 0.3, 0.2};
    model.parametric[s] = {0.2, 0.1, 0.3};
  }
  DecodeConfig cfg;
  cfg.sample = true;
  cfg.max_tokens = 6;
  cfg.seed = 77;
  const auto a = decode_answer(prompt(1), prompt(9), model, 0.5, cfg);
  const auto b = decode_answer(prompt(1), prompt(9), model, 0.5, cfg);
  CHECK(a.tokens == b.tokens);
  CHECK(trace_jsonl(a.trace) == trace_jsonl(b.trace));
}

TEST_CASE("trace lines carry signals or nulls", "[decoding]") {
  StepTrace on{0, ConflictSignals{0.1, 0.2, 0.3, 0.1, 0.6}, 65};
  StepTrace off{1, std::nullopt, 0};
  const std::vector<StepTrace> t{on, off};
  const auto jsonl = trace_jsonl(t);
  const auto nl = jsonl.find('\n');
  const auto first = nlohmann::json::parse(jsonl.substr(0, nl));
  const auto second = nlohmann::json::parse(jsonl.substr(nl + 1));
  CHECK(first["s_prime"] == 0.6);
  CHECK(first["token_id"] == 65);
  CHECK(second["D"].is_null());
  CHECK(second["step"] == 1);
  CHECK(jsonl.back() == '\n');
}

TEST_CASE("worked divergence and entropy examples", "[decoding]") {
  const std::vector<double> p{0.7, 0.3};
  const std::vector<double> q{0.3, 0.7};
  const double m = 0.5;
  const double js = 0.5 * (0.7 * std::log(0.7 / m) + 0.3 * std::log(0.3 / m)) +
                    0.5 * (0.3 * std::log(0.3 / m) + 0.7 * std::log(0.7 / m));
  CHECK_THAT(divergence(p, q), WithinAbs(js / std::log(2.0), 1e-12));

  const std::vector<double> pc{0.8, 0.1, 0.1};
  const std::vector<double> pm{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const double h = -(0.8 * std::log(0.8) + 0.2 * std::log(0.1));
  CHECK_THAT(entropy_gap(pc, pm), WithinAbs((std::log(3.0) - h) / std::log(3.0), 1e-12));
  CHECK(entropy_gap(pc, pc) == 0.0);
  CHECK(conflict_score(0, 0, 0, 0) == 0.5);
}

TEST_CASE("equal passes decode like the contextual pass alone", "[decoding]") {
  TableLM model;
  model.contextual = {{0, {0.0, 0.2, 1.0}}, {1, {0.0, 2.0, 1.0}}, {2, {3.0, 0.0, 0.0}}};
  model.parametric = model.contextual;
  DecodeConfig cad;
  DecodeConfig plain;
  plain.contrast = false;
  const auto a = decode_answer(prompt(1), prompt(9), model, 0.3, cad);
  const auto b = decode_answer(prompt(1), prompt(9), model, 0.3, plain);
  CHECK(a.tokens == b.tokens);
  CHECK(a.tokens == std::vector<lm::TokenId>{2, 1});
}
