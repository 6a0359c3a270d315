#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "ccvqa/errors.hpp"
#include "ccvqa/toy_decoder.hpp"

using namespace ccvqa;
using namespace ccvqa::lm;
using Catch::Matchers::WithinAbs;

namespace {

ToyLMConfig small(std::uint64_t seed = 5) {
  ToyLMConfig c;
  c.model_dim = 16;
  c.heads = 2;
  c.layers = 2;
  c.seed = seed;
  return c;
}

PositionMap integer_positions(std::size_t n) {
  PositionMap m;
  for (std::size_t i = 0; i < n; ++i) m.append(Region::query);
  return m;
}

double max_abs_diff(const Logits& a, const Logits& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("byte vocabulary round trip", "[toy_lm]") {
  const auto t = bytes::encode("Amanita\xff");
  CHECK(t.back() == 255);
  CHECK(bytes::decode(t) == "Amanita\xff");
  const std::vector<TokenId> bad{300};
  CHECK_THROWS_AS(bytes::decode(bad), VocabError);
}

TEST_CASE("config validation", "[toy_lm]") {
  auto c = small();
  c.model_dim = 18;
  c.heads = 2;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small();
  c.pi_scale = 0.5;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  const auto j = small(9).to_json();
  const auto back = ToyLMConfig::from_json(j);
  CHECK(back.seed == 9);
  CHECK(back.model_dim == 16);
}

TEST_CASE("weights are deterministic per seed", "[toy_lm]") {
  const auto a = Weights::random(small(1));
  const auto b = Weights::random(small(1));
  const auto c = Weights::random(small(2));
  CHECK(a.at("lm_head").values == b.at("lm_head").values);
  CHECK(a.at("lm_head").values != c.at("lm_head").values);
  CHECK(a.at("layers.1.w1").shape == std::vector<std::size_t>{16, 64});
  CHECK(a.names().front() == "tok_embedding");
  CHECK(a.names().back() == "lm_head");
}

TEST_CASE("forward pass is deterministic and finite", "[toy_lm]") {
  const ToyDecoder m(small());
  const auto tokens = bytes::encode("What is this?");
  const auto pos = integer_positions(tokens.size());
  const auto l1 = m.next_token_logits(tokens, pos);
  const auto l2 = ToyDecoder(small()).next_token_logits(tokens, pos);
  REQUIRE(l1.size() == 256);
  CHECK(l1 == l2);
  for (const double x : l1) CHECK(std::isfinite(x));
}

TEST_CASE("forward pass errors", "[toy_lm]") {
  const ToyDecoder m(small());
  const std::vector<TokenId> bad{1, 256};
  CHECK_THROWS_AS(m.next_token_logits(bad, integer_positions(2)), VocabError);
  const std::vector<TokenId> none;
  CHECK_THROWS_AS(m.next_token_logits(none, integer_positions(0)), ShapeError);
  const std::vector<TokenId> two{1, 2};
  CHECK_THROWS_AS(m.next_token_logits(two, integer_positions(3)), ShapeError);
}

TEST_CASE("alpha one positions give the same logits as integer positions", "[toy_lm]") {
  const ToyDecoder m(small());
  const auto tokens = bytes::encode("Amanita has a ring.");
  std::vector<StreamToken> stream;
  for (const auto t : tokens) stream.push_back({t, Region::context, 0});
  const auto cpe = assign_positions(stream, {0}, 1, 1.0);
  CHECK(m.next_token_logits(tokens, cpe) == m.next_token_logits(tokens, integer_positions(tokens.size())));
}

TEST_CASE("logits depend on positions only through offsets", "[toy_lm][property]") {
  const ToyDecoder m(small());
  const auto tokens = bytes::encode("red cap, white spots");
  auto pos = integer_positions(tokens.size());
  const auto base = m.next_token_logits(tokens, pos);
  for (auto& p : pos.positions) p += 37.25;
  CHECK(max_abs_diff(base, m.next_token_logits(tokens, pos)) < 1e-8);
}

TEST_CASE("compressed positions change the logits", "[toy_lm]") {
  const ToyDecoder m(small());
  const auto tokens = bytes::encode("red cap, white spots");
  const auto pos = integer_positions(tokens.size());
  auto squeezed = pos;
  for (std::size_t i = 0; i < squeezed.size(); ++i) squeezed.positions[i] = 0.5 * static_cast<double>(i);
  CHECK(max_abs_diff(m.next_token_logits(tokens, pos), m.next_token_logits(tokens, squeezed)) > 1e-6);
}

TEST_CASE("position interpolation matches dividing positions by hand", "[toy_lm]") {
  auto cfg = small();
  cfg.pi_scale = 4.0;
  const ToyDecoder scaled(cfg);
  const ToyDecoder plain(small());
  const auto tokens = bytes::encode("abcdefgh");
  const auto pos = integer_positions(tokens.size());
  auto divided = pos;
  for (auto& p : divided.positions) p /= 4.0;
  CHECK(scaled.next_token_logits(tokens, pos) == plain.next_token_logits(tokens, divided));
}

TEST_CASE("weights survive a save/load round trip", "[toy_lm]") {
  const auto dir = std::filesystem::temp_directory_path() / "ccvqa_toy_weights";
  std::filesystem::create_directories(dir);
  const auto bin = (dir / "w.bin").string();
  const auto side = (dir / "w.json").string();
  const ToyDecoder m(small());
  m.weights().save(bin, side);
  CHECK(std::filesystem::file_size(bin) % 4 == 0);
  const ToyDecoder loaded(small(), Weights::load(bin, side));
  const auto tokens = bytes::encode("Eiffel");
  const auto pos = integer_positions(tokens.size());
  CHECK(loaded.next_token_logits(tokens, pos) == m.next_token_logits(tokens, pos));

  std::filesystem::resize_file(bin, 16);
  CHECK_THROWS_AS(Weights::load(bin, side), ShapeError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mismatched weight shapes are rejected", "[toy_lm]") {
  auto cfg = small();
  auto w = Weights::random(cfg);
  cfg.vocab_size = 128;
  CHECK_THROWS_AS(ToyDecoder(cfg, w), ShapeError);
}
