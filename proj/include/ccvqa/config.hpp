#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "ccvqa/eval.hpp"
#include "ccvqa/http_clients.hpp"
#include "ccvqa/pipeline.hpp"
#include "ccvqa/scenario_lm.hpp"
#include "ccvqa/toy_decoder.hpp"

namespace ccvqa::app {

struct LMSettings {
  std::string kind = "toy";  // toy | scenario
  lm::ToyLMConfig toy;
  std::string weights_bin;      // optional snapshot
  std::string weights_sidecar;
};

struct RunConfig {
  pipeline::PipelineConfig pipeline;
  std::size_t workers = 1;
  eval::ScoreRule rule = eval::ScoreRule::exact_relaxed;
  bool numeric_tolerance = false;
  std::size_t histogram_bins = 20;

  std::string kb;
  std::string queries;
  std::string ground_truth;
  std::string out;

  bool stub = false;
  std::string stub_bundle;  // scripted VLM, pinned embeddings and scenario LM
  LMSettings lm;
  std::optional<clients::HttpEndpoint> vlm;
  std::optional<clients::HttpEndpoint> embedder;
  std::size_t embedding_dimension = 64;
  std::string exchange_log;

  // Unknown keys are rejected with ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;
};

nlohmann::json to_json(const pipeline::PipelineConfig& cfg);

// The scripted world: VLM rules, embedding pins and the scenario LM.
struct StubBundle {
  std::size_t dimension = 64;
  std::vector<std::string> anchors;
  struct Pin {
    std::string key;
    std::string anchor;
    double score = 0.0;
  };
  std::vector<Pin> image_pins;
  std::vector<Pin> text_pins;
  clients::StubScript vlm;
  std::optional<lm::ScenarioLMConfig> lm;

  static StubBundle from_json(const nlohmann::json& j);
  static StubBundle load(const std::string& path);
  std::shared_ptr<clients::PinnedEmbedder> make_embedder() const;
};

// Owns every object a run needs and exposes them as a pipeline::World.
struct Runtime {
  std::shared_ptr<corpus::KnowledgeBase> kb;
  std::shared_ptr<const clients::EmbeddingProvider> embedder;
  std::shared_ptr<const clients::ChatClient> vlm;
  std::shared_ptr<const lm::LanguageModel> model;
  std::shared_ptr<std::map<std::string, corpus::GroundTruth>> ground_truth;

  pipeline::World world() const;
};

// Loads the KB (and ground truth when configured) and builds the clients.
Runtime build_runtime(const RunConfig& cfg);

}  // namespace ccvqa::app
