#include "ccvqa/config.hpp"

#include <set>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::app {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

json to_json(const pipeline::PipelineConfig& c) {
  return {{"mode", pipeline::to_string(c.mode)},
          {"components", {{"vccr", c.components.vccr}, {"cpe", c.components.cpe}, {"cad", c.components.cad}}},
          {"oracle", c.oracle},
          {"tau", c.tau},
          {"cpe_alpha", c.cpe_alpha},
          {"delta", c.delta},
          {"top_k_articles", c.top_k_articles},
          {"top_sections", c.top_sections},
          {"oracle_slot", c.oracle_slot},
          {"max_tokens", c.max_tokens},
          {"sample", c.sample},
          {"temperature", c.temperature},
          {"seed", c.seed},
          {"vccr_workers", c.vccr_workers},
          {"generator", c.generator == pipeline::Generator::lm ? "lm" : "chat"}};
}

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"mode", "components", "oracle", "tau", "cpe_alpha", "delta", "top_k_articles", "top_sections",
                  "oracle_slot", "max_tokens", "sample", "temperature", "seed", "vccr_workers", "generator",
                  "workers", "scoring", "numeric_tolerance", "histogram_bins", "kb", "queries", "ground_truth",
                  "out", "stub", "stub_bundle", "lm", "vlm", "embedder", "embedding_dimension", "exchange_log"},
                 "config");
  RunConfig c;
  try {
    auto& p = c.pipeline;
    if (j.contains("mode")) p.mode = pipeline::mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("components")) {
      const auto& comp = j.at("components");
      reject_unknown(comp, {"vccr", "cpe", "cad"}, "components");
      read(comp, "vccr", p.components.vccr);
      read(comp, "cpe", p.components.cpe);
      read(comp, "cad", p.components.cad);
    }
    read(j, "oracle", p.oracle);
    read(j, "tau", p.tau);
    read(j, "cpe_alpha", p.cpe_alpha);
    read(j, "delta", p.delta);
    read(j, "top_k_articles", p.top_k_articles);
    read(j, "top_sections", p.top_sections);
    read(j, "oracle_slot", p.oracle_slot);
    read(j, "max_tokens", p.max_tokens);
    read(j, "sample", p.sample);
    read(j, "temperature", p.temperature);
    read(j, "seed", p.seed);
    read(j, "vccr_workers", p.vccr_workers);
    if (j.contains("generator")) {
      const auto g = j.at("generator").get<std::string>();
      if (g == "lm") {
        p.generator = pipeline::Generator::lm;
      } else if (g == "chat") {
        p.generator = pipeline::Generator::chat;
      } else {
        throw ConfigError("unknown generator '" + g + "'");
      }
    }
    read(j, "workers", c.workers);
    if (j.contains("scoring")) c.rule = eval::score_rule_from_string(j.at("scoring").get<std::string>());
    read(j, "numeric_tolerance", c.numeric_tolerance);
    read(j, "histogram_bins", c.histogram_bins);
    read(j, "kb", c.kb);
    read(j, "queries", c.queries);
    read(j, "ground_truth", c.ground_truth);
    read(j, "out", c.out);
    read(j, "stub", c.stub);
    read(j, "stub_bundle", c.stub_bundle);
    if (j.contains("lm")) {
      const auto& l = j.at("lm");
      reject_unknown(l,
                     {"kind", "vocab_size", "model_dim", "layers", "heads", "seed", "rope_base", "pi_scale",
                      "weights_bin", "weights_sidecar"},
                     "lm");
      read(l, "kind", c.lm.kind);
      read(l, "weights_bin", c.lm.weights_bin);
      read(l, "weights_sidecar", c.lm.weights_sidecar);
      json toy = l;
      toy.erase("kind");
      toy.erase("weights_bin");
      toy.erase("weights_sidecar");
      c.lm.toy = lm::ToyLMConfig::from_json(toy);
    }
    if (j.contains("vlm")) c.vlm = clients::HttpEndpoint::from_json(j.at("vlm"));
    if (j.contains("embedder")) c.embedder = clients::HttpEndpoint::from_json(j.at("embedder"));
    read(j, "embedding_dimension", c.embedding_dimension);
    read(j, "exchange_log", c.exchange_log);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j = app::to_json(pipeline);
  j["workers"] = workers;
  j["scoring"] = eval::to_string(rule);
  j["numeric_tolerance"] = numeric_tolerance;
  j["histogram_bins"] = histogram_bins;
  j["kb"] = kb;
  j["queries"] = queries;
  j["ground_truth"] = ground_truth;
  j["out"] = out;
  j["stub"] = stub;
  j["stub_bundle"] = stub_bundle;
  json l = lm.toy.to_json();
  l["kind"] = lm.kind;
  l["weights_bin"] = lm.weights_bin;
  l["weights_sidecar"] = lm.weights_sidecar;
  j["lm"] = l;
  if (vlm) j["vlm"] = vlm->to_json();
  if (embedder) j["embedder"] = embedder->to_json();
  j["embedding_dimension"] = embedding_dimension;
  j["exchange_log"] = exchange_log;
  return j;
}

void RunConfig::validate() const {
  pipeline.validate();
  if (workers == 0) throw ConfigError("workers must be positive");
  if (histogram_bins == 0) throw ConfigError("histogram_bins must be positive");
  if (lm.kind != "toy" && lm.kind != "scenario") throw ConfigError("lm.kind must be toy or scenario");
  if (embedding_dimension < 2) throw ConfigError("embedding_dimension must be at least 2");
}

StubBundle StubBundle::from_json(const json& j) {
  reject_unknown(j, {"dimension", "anchors", "image_pins", "text_pins", "vlm", "lm"}, "stub bundle");
  StubBundle b;
  try {
    read(j, "dimension", b.dimension);
    read(j, "anchors", b.anchors);
    for (const auto& p : j.value("image_pins", json::array())) {
      b.image_pins.push_back({p.at("ref").get<std::string>(), p.at("anchor").get<std::string>(),
                              p.at("score").get<double>()});
    }
    for (const auto& p : j.value("text_pins", json::array())) {
      b.text_pins.push_back({p.at("text").get<std::string>(), p.at("anchor").get<std::string>(),
                             p.at("score").get<double>()});
    }
    if (j.contains("vlm")) b.vlm = clients::StubScript::from_json(j.at("vlm"));
    if (j.contains("lm")) b.lm = lm::ScenarioLMConfig::from_json(j.at("lm"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stub bundle: ") + e.what());
  }
  return b;
}

StubBundle StubBundle::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("stub bundle " + path + ": " + e.what());
  }
  return from_json(j);
}

std::shared_ptr<clients::PinnedEmbedder> StubBundle::make_embedder() const {
  auto e = std::make_shared<clients::PinnedEmbedder>(dimension);
  for (const auto& a : anchors) e->add_anchor(a);
  for (const auto& p : image_pins) e->pin_image(p.key, p.anchor, p.score);
  for (const auto& p : text_pins) e->pin_text(p.key, p.anchor, p.score);
  return e;
}

pipeline::World Runtime::world() const {
  pipeline::World w;
  w.kb = kb.get();
  w.embedder = embedder.get();
  w.vlm = vlm.get();
  w.model = model.get();
  w.ground_truth = ground_truth.get();
  return w;
}

Runtime build_runtime(const RunConfig& cfg) {
  Runtime rt;
  if (!cfg.kb.empty()) rt.kb = std::make_shared<corpus::KnowledgeBase>(corpus::load_knowledge_base(cfg.kb));
  if (!cfg.ground_truth.empty()) {
    rt.ground_truth = std::make_shared<std::map<std::string, corpus::GroundTruth>>(
        corpus::load_ground_truth(cfg.ground_truth));
  }

  std::optional<StubBundle> bundle;
  if (!cfg.stub_bundle.empty()) bundle = StubBundle::load(cfg.stub_bundle);

  std::shared_ptr<const clients::EmbeddingProvider> embedder;
  if (cfg.stub) {
    if (bundle) {
      embedder = bundle->make_embedder();
    } else {
      embedder = std::make_shared<clients::StubEmbedder>(cfg.embedding_dimension);
    }
    rt.vlm = std::make_shared<clients::StubChatClient>(bundle ? bundle->vlm : clients::StubScript{});
  } else {
    if (!cfg.embedder) throw ConfigError("live mode needs an embedder endpoint (or use --stub)");
    if (!cfg.vlm) throw ConfigError("live mode needs a vlm endpoint (or use --stub)");
    embedder = std::make_shared<clients::HttpEmbedder>(*cfg.embedder, cfg.embedding_dimension);
    auto chat = std::make_shared<clients::HttpChatClient>(*cfg.vlm);
    if (!cfg.exchange_log.empty()) chat->set_exchange_log(cfg.exchange_log);
    rt.vlm = chat;
  }
  rt.embedder = std::make_shared<clients::CachingEmbedder>(embedder);

  if (cfg.lm.kind == "scenario") {
    if (!bundle || !bundle->lm) throw ConfigError("the scenario LM needs a stub bundle with an \"lm\" section");
    rt.model = std::make_shared<lm::ScenarioLM>(*bundle->lm);
  } else if (!cfg.lm.weights_bin.empty()) {
    rt.model = std::make_shared<lm::ToyDecoder>(
        cfg.lm.toy, lm::Weights::load(cfg.lm.weights_bin, cfg.lm.weights_sidecar));
  } else {
    rt.model = std::make_shared<lm::ToyDecoder>(cfg.lm.toy);
  }
  return rt;
}

}  // namespace ccvqa::app
