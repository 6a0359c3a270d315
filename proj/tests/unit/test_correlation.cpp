#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "ccvqa/correlation.hpp"
#include "ccvqa/errors.hpp"

using namespace ccvqa;
using namespace ccvqa::correlation;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<ScoredSentence> scored(const std::vector<double>& scores) {
  std::vector<ScoredSentence> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ScoredSentence s;
    s.global_index = i;
    s.context_id = "c";
    s.text = "s" + std::to_string(i);
    s.score = scores[i];
    s.clamped_score = std::max(scores[i], 0.0);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("sentence segmentation", "[correlation]") {
  CHECK(segment_sentences("A cap. It is red! Is it? ") ==
        std::vector<std::string>{"A cap.", "It is red!", "Is it?"});
  CHECK(segment_sentences("Height 3.5 m. Done") == std::vector<std::string>{"Height 3.5 m.", "Done"});
  CHECK(segment_sentences("   ").empty());
  CHECK(segment_sentences("no terminator") == std::vector<std::string>{"no terminator"});
}

TEST_CASE("low set size is floor(tau N)", "[correlation]") {
  CHECK(low_set_size(10, 0.75) == 7);
  CHECK(low_set_size(100, 0.29) == 29);
  CHECK(low_set_size(3, 0.0) == 0);
  CHECK(low_set_size(3, 1.0) == 3);
  CHECK(low_set_size(0, 0.5) == 0);
  CHECK_THROWS_AS(low_set_size(3, 1.5), ParameterError);
  CHECK_THROWS_AS(low_set_size(3, -0.1), ParameterError);
}

TEST_CASE("low set holds the lowest clamped scores", "[correlation]") {
  const auto s = scored({0.9, -0.3, 0.5, 0.1, 0.7});
  CHECK(low_correlation_set(s, 0.4) == std::set<std::size_t>{1, 3});
  CHECK(low_correlation_set(s, 0.6) == std::set<std::size_t>{1, 2, 3});
}

TEST_CASE("ties go to the later sentence", "[correlation]") {
  const auto s = scored({0.2, 0.2, 0.2, 0.2});
  CHECK(low_correlation_set(s, 0.5) == std::set<std::size_t>{2, 3});
  // negatives clamp to zero and tie as well
  const auto n = scored({-0.5, -0.1, 0.4});
  CHECK(low_correlation_set(n, 0.34) == std::set<std::size_t>{1});
}

TEST_CASE("low set is invariant to increasing affine maps of positive scores", "[correlation][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng() % 40);
    for (auto& x : a) x = u(rng);
    std::vector<double> b = a;
    for (auto& x : b) x = 0.5 * x + 0.25;
    const double tau = static_cast<double>(rng() % 101) / 100.0;
    const auto la = low_correlation_set(scored(a), tau);
    CHECK(la == low_correlation_set(scored(b), tau));
    CHECK(la.size() == low_set_size(a.size(), tau));
  }
}

TEST_CASE("K on reference vectors", "[correlation]") {
  const std::vector<double> uniform{0.4, 0.4, 0.4};
  CHECK(aggregate_K(uniform) == 1.0);
  const std::vector<double> peaked{1.0, 0.0};
  CHECK_THAT(aggregate_K(peaked), WithinAbs(0.5, 1e-12));
  const std::vector<double> single{0.3};
  CHECK_THAT(aggregate_K(single), WithinAbs(0.7, 1e-12));
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(aggregate_K(zeros) == 1.0);
  const std::vector<double> empty;
  CHECK_THROWS_AS(aggregate_K(empty), AggregationError);
  const std::vector<double> negative{0.2, -0.1};
  CHECK_THROWS_AS(aggregate_K(negative), AggregationError);
}

TEST_CASE("concentration matches one minus normalized entropy", "[correlation]") {
  const std::vector<double> r{0.6, 0.2, 0.2};
  const double h = -(0.6 * std::log(0.6) + 2 * 0.2 * std::log(0.2));
  CHECK_THAT(concentration(r), WithinAbs(1.0 - h / std::log(3.0), 1e-12));
  CHECK_THAT(aggregate_K(r), WithinAbs(1.0 - (1.0 / 3.0) * (1.0 - h / std::log(3.0)), 1e-12));
}

TEST_CASE("K stays in [0, 1] for random profiles", "[correlation][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> r(1 + rng() % 30);
    for (auto& x : r) x = u(rng);
    const double k = aggregate_K(r);
    CHECK(k >= 0.0);
    CHECK(k <= 1.0);
  }
}

TEST_CASE("sentence score averages the two cosines", "[correlation]") {
  clients::PinnedEmbedder e(16);
  e.pin_text("q", "x", 1.0);
  e.pin_image("img", "x", 1.0);
  e.pin_text("The cap is red.", "x", 0.6);
  CHECK_THAT(score_sentence("The cap is red.", "q", "img", e), WithinAbs(0.6, 1e-12));
  CHECK_THROWS_AS(score_sentence("", "q", "img", e), ScoringError);
}

TEST_CASE("profile spans all contexts with contiguous indices", "[correlation]") {
  clients::PinnedEmbedder e(16);
  e.pin_text("q", "x", 1.0);
  e.pin_image("img", "x", 1.0);
  e.pin_text("Alpha one.", "x", 0.9);
  e.pin_text("Alpha two.", "x", 0.1);
  e.pin_text("Beta one.", "x", 0.5);
  const std::vector<ContextDoc> docs{{"parametric", "Alpha one. Alpha two.", true}, {"e/s", "Beta one.", false}};
  const auto p = build_profile(docs, "q", "img", e, 0.34);
  REQUIRE(p.sentences.size() == 3);
  CHECK(p.sentences[2].global_index == 2);
  CHECK(p.sentences[2].context_id == "e/s");
  CHECK(p.low_set == std::set<std::size_t>{1});
  CHECK(p.in_low_set(1));
  const std::vector<double> r{0.9, 0.1, 0.5};
  CHECK_THAT(p.K, WithinAbs(aggregate_K(r), 1e-9));
  CHECK(profile_csv(p).starts_with("global_index,context_id,score,clamped_score,in_low_set\n0,parametric,"));
}

TEST_CASE("empty profile keeps K at one", "[correlation]") {
  const auto p = profile_from_scores({}, 0.75);
  CHECK(p.K == 1.0);
  CHECK(p.low_set.empty());
}

TEST_CASE("worked correlation examples", "[correlation]") {
  CHECK(segment_sentences("A. B! C?") == std::vector<std::string>{"A.", "B!", "C?"});
  CHECK(segment_sentences("").empty());

  clients::PinnedEmbedder e(16);
  e.pin_text("q", "x", 1.0);
  e.pin_image("img", "y", 1.0);
  std::vector<double> v(16, 0.0);
  v[0] = 0.6;
  v[1] = 0.2;
  v[2] = std::sqrt(1.0 - 0.36 - 0.04);
  e.pin_text_vector("mixed", v);
  CHECK_THAT(score_sentence("mixed", "q", "img", e), WithinAbs(0.4, 1e-12));
  std::vector<double> w(16, 0.0);
  w[5] = 1.0;
  e.pin_text_vector("orthogonal", w);
  CHECK_THAT(score_sentence("orthogonal", "q", "img", e), WithinAbs(0.0, 1e-12));
  e.pin_text("same", "x", 1.0);
  e.pin_image("img2", "x", 1.0);
  CHECK_THAT(score_sentence("same", "q", "img2", e), WithinAbs(1.0, 1e-12));

  std::vector<double> eight{0.9, 0.1, 0.8, 0.2, 0.7, 0.3, 0.6, 0.4};
  std::vector<ScoredSentence> s;
  for (std::size_t i = 0; i < eight.size(); ++i) s.push_back({i, "c", "t", eight[i], eight[i]});
  CHECK(low_correlation_set(s, 0.75) == std::set<std::size_t>{1, 3, 4, 5, 6, 7});
  CHECK(low_correlation_set(s, 0.0).empty());

  const std::vector<double> four{0.5, 0.5, 0.5, 0.5};
  CHECK(aggregate_K(four) == 1.0);
  const std::vector<double> single{0.8};
  CHECK_THAT(aggregate_K(single), WithinAbs(0.2, 1e-15));
}
