#include <catch2/catch_amalgamated.hpp>

#include "ccvqa/config.hpp"
#include "ccvqa/errors.hpp"
#include "ccvqa/pipeline.hpp"
#include "ccvqa/prompts.hpp"

using namespace ccvqa;
using namespace ccvqa::pipeline;

namespace {

const std::string kData = std::string(CCVQA_SOURCE_DIR) + "/data/scenarios/";

const app::Runtime& runtime() {
  static const app::Runtime rt = [] {
    app::RunConfig cfg;
    cfg.stub = true;
    cfg.kb = kData + "kb.jsonl";
    cfg.queries = kData + "queries.jsonl";
    cfg.ground_truth = kData + "gt.jsonl";
    cfg.stub_bundle = kData + "stub.json";
    cfg.lm.kind = "scenario";
    return app::build_runtime(cfg);
  }();
  return rt;
}

const std::vector<corpus::Query>& queries() {
  static const auto q = corpus::load_queries(kData + "queries.jsonl");
  return q;
}

PipelineConfig with_mode(Mode m) {
  PipelineConfig c;
  c.mode = m;
  return c;
}

std::string trace_of(const QueryOutcome& o) { return decoding::trace_jsonl(o.decode.trace); }

}  // namespace

TEST_CASE("mode names", "[pipeline]") {
  for (const auto m : {Mode::base, Mode::rag, Mode::ccvqa, Mode::oracle}) CHECK(mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(mode_from_string("vanilla"), ConfigError);
}

TEST_CASE("config validation", "[pipeline]") {
  auto c = with_mode(Mode::ccvqa);
  c.tau = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = with_mode(Mode::ccvqa);
  c.cpe_alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = with_mode(Mode::ccvqa);
  c.top_sections = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_FALSE(with_mode(Mode::rag).effective_components().cad);
  CHECK(with_mode(Mode::oracle).uses_oracle());
  CHECK_FALSE(with_mode(Mode::base).uses_retrieval());
}

TEST_CASE("contextual stream layout", "[pipeline]") {
  const corpus::Query q{"x", "img/x.jpg", "Q?", {"a"}, std::nullopt};
  const std::vector<ContextDoc> docs{{"parametric", "One. Two.", true}, {"e/s", "Three.", false}};
  const auto s = contextual_stream(q, docs, std::string("feat"));
  CHECK(s.text() == image_line("img/x.jpg") + prompts::final_answer("Q?", "feat", "One. Two.\nThree."));
  CHECK(s.sentence_count == 3);
  std::size_t rvis = 0;
  for (const auto& t : s.tokens) {
    if (t.region == lm::Region::rvis) ++rvis;
  }
  CHECK(rvis == 4);

  const auto v = contextual_stream(q, docs, std::nullopt);
  const auto vp = prompts::vanilla_answer_parts("Q?");
  CHECK(v.text() == "Image: img/x.jpg\n" + vp.before_information + "One. Two.\nThree." + vp.after);
  CHECK(parametric_stream(q).text() == "Image: img/x.jpg\n" + prompts::parametric_answer("Q?"));
}

TEST_CASE("low-set sentences are compressed in the prompt", "[pipeline]") {
  const corpus::Query q{"x", "img/x.jpg", "Q?", {"a"}, std::nullopt};
  const std::vector<ContextDoc> docs{{"e/s", "Ab. Cd.", false}};
  const auto s = contextual_stream(q, docs, std::nullopt);
  const auto plain = to_prompt(s, {}, 1.0);
  const auto squeezed = to_prompt(s, {0}, 0.5);
  CHECK(plain.positions.positions.back() == static_cast<double>(s.tokens.size() - 1));
  CHECK(squeezed.positions.positions.back() == plain.positions.positions.back() - 0.5 * 4);  // "Ab. " is 4 bytes
  CHECK(squeezed.positions.is_valid(0.5));
}

TEST_CASE("base mode answers from the parametric prompt only", "[pipeline]") {
  const auto o = answer_query(queries()[0], runtime().world(), with_mode(Mode::base));
  CHECK(o.retrieval.contexts.empty());
  CHECK_FALSE(o.vccr);
  CHECK_FALSE(o.profile);
  CHECK(o.K == 1.0);
  for (const auto& step : o.decode.trace) CHECK_FALSE(step.signals);
}

TEST_CASE("rag mode uses retrieval without the conflict components", "[pipeline]") {
  const auto o = answer_query(queries()[0], runtime().world(), with_mode(Mode::rag));
  CHECK(o.retrieval.contexts.size() == 3);
  CHECK_FALSE(o.vccr);
  CHECK_FALSE(o.profile);
  CHECK_FALSE(o.rewrite);
  for (const auto& step : o.decode.trace) CHECK_FALSE(step.signals);
}

TEST_CASE("ccvqa with every component off reproduces rag", "[pipeline]") {
  auto off = with_mode(Mode::ccvqa);
  off.components = {false, false, false};
  for (const auto& q : queries()) {
    const auto a = answer_query(q, runtime().world(), off);
    const auto b = answer_query(q, runtime().world(), with_mode(Mode::rag));
    CHECK(a.prediction == b.prediction);
    CHECK(trace_of(a) == trace_of(b));
  }
}

TEST_CASE("neutral position settings reproduce the uncompressed run", "[pipeline]") {
  auto no_cpe = with_mode(Mode::ccvqa);
  no_cpe.components.cpe = false;
  auto alpha_one = with_mode(Mode::ccvqa);
  alpha_one.cpe_alpha = 1.0;
  auto tau_zero = with_mode(Mode::ccvqa);
  tau_zero.tau = 0.0;
  for (const auto& q : queries()) {
    const auto ref = answer_query(q, runtime().world(), no_cpe);
    const auto a = answer_query(q, runtime().world(), alpha_one);
    const auto t = answer_query(q, runtime().world(), tau_zero);
    CHECK(trace_of(a) == trace_of(ref));
    CHECK(a.contextual_prompt.positions.positions == ref.contextual_prompt.positions.positions);
    CHECK(t.contextual_prompt.positions.positions == ref.contextual_prompt.positions.positions);
    CHECK(t.prediction == ref.prediction);
  }
}

TEST_CASE("full pipeline records every stage", "[pipeline]") {
  const auto o = answer_query(queries()[0], runtime().world(), with_mode(Mode::ccvqa));
  REQUIRE(o.vccr);
  REQUIRE(o.profile);
  REQUIRE(o.rewrite);
  CHECK(o.vccr->contexts.front().parametric);
  CHECK(o.vccr->contexts.size() == o.retrieval.contexts.size() + 1);
  CHECK(o.K == o.profile->K);
  CHECK(o.profile->low_set.size() == correlation::low_set_size(o.profile->sentences.size(), 0.75));
  CHECK(o.contextual_prompt.positions.is_valid(0.5));
  for (const auto& step : o.decode.trace) CHECK(step.signals);

  const auto j = to_json(o, true);
  CHECK(j["qid"] == "s01");
  CHECK(j["trace"].size() == o.decode.trace.size());
  CHECK(j["rvis"].is_string());
  CHECK_FALSE(to_json(o, false).contains("trace"));
}

TEST_CASE("oracle mode inserts the ground-truth section", "[pipeline]") {
  auto cfg = with_mode(Mode::rag);
  cfg.oracle = true;
  bool any_inserted = false;
  for (const auto& q : queries()) {
    const auto o = answer_query(q, runtime().world(), cfg);
    const auto& gt = runtime().ground_truth->at(q.qid);
    const auto id = corpus::context_id_for(gt.entity_id, gt.section_id);
    bool found = false;
    for (const auto& c : o.retrieval.contexts) found = found || c.context_id == id;
    CHECK(found);
    any_inserted = any_inserted || o.retrieval.oracle_inserted;
  }
  CHECK(any_inserted);

  auto world = runtime().world();
  world.ground_truth = nullptr;
  CHECK_THROWS_AS(answer_query(queries()[0], world, with_mode(Mode::oracle)), PipelineError);
}

TEST_CASE("chat generator asks the VLM for the final answer", "[pipeline]") {
  clients::StubScript script;
  script.rules = {{"Short Answer:", "  Amanita \n"}};
  script.fallback = "<reason>x</reason>";
  const clients::StubChatClient vlm(script);
  auto world = runtime().world();
  world.vlm = &vlm;
  world.model = nullptr;
  auto cfg = with_mode(Mode::rag);
  cfg.generator = Generator::chat;
  CHECK(answer_query(queries()[0], world, cfg).prediction == "Amanita");
  CHECK_THROWS_AS(answer_query(queries()[0], world, with_mode(Mode::rag)), PipelineError);
}
