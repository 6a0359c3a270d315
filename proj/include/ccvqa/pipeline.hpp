#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccvqa/chat.hpp"
#include "ccvqa/corpus.hpp"
#include "ccvqa/correlation.hpp"
#include "ccvqa/decoding.hpp"
#include "ccvqa/embedding.hpp"
#include "ccvqa/language_model.hpp"
#include "ccvqa/vccr.hpp"

namespace ccvqa::pipeline {

enum class Mode { base, rag, ccvqa, oracle };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);  // ConfigError on unknown names

struct Components {
  bool vccr = true;
  bool cpe = true;
  bool cad = true;
};

enum class Generator { lm, chat };

struct PipelineConfig {
  Mode mode = Mode::ccvqa;
  Components components;
  bool oracle = false;  // force the ground-truth section into the top sections
  double tau = 0.75;
  double cpe_alpha = 0.5;
  double delta = 0.1;
  std::size_t top_k_articles = 20;
  std::size_t top_sections = 3;
  std::size_t oracle_slot = 3;
  std::size_t max_tokens = 32;
  bool sample = false;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t vccr_workers = 1;
  Generator generator = Generator::lm;

  // Components and oracle flag after applying the mode.
  Components effective_components() const;
  bool uses_retrieval() const { return mode != Mode::base; }
  bool uses_oracle() const { return mode == Mode::oracle || oracle; }
  void validate() const;
};

// Everything a query run reads. Clients not needed by the configuration may be null.
struct World {
  const corpus::KnowledgeBase* kb = nullptr;
  const clients::EmbeddingProvider* embedder = nullptr;
  const clients::ChatClient* vlm = nullptr;
  const lm::LanguageModel* model = nullptr;
  const std::map<std::string, corpus::GroundTruth>* ground_truth = nullptr;
};

struct RetrievalOutcome {
  std::vector<corpus::RetrievedContext> contexts;
  bool truncated = false;
  bool oracle_inserted = false;
};

RetrievalOutcome retrieve_contexts(const corpus::Query& query, const World& world, const PipelineConfig& cfg);

// Tokenised prompt with region tags and, for context tokens, sentence indices.
struct PromptStream {
  std::vector<lm::StreamToken> tokens;
  std::size_t sentence_count = 0;

  void add(std::string_view text, lm::Region region, std::optional<std::size_t> sentence = std::nullopt);
  std::vector<lm::TokenId> ids() const;
  std::string text() const;
};

std::string image_line(const std::string& image_ref);

// Contexts joined in order; sentences separated by a space, contexts by a newline.
void add_contexts(PromptStream& stream, std::span<const ContextDoc> contexts);

// With a summary: the final-answer template with R_vis in the feature slot.
// Without: the vanilla template.
PromptStream contextual_stream(const corpus::Query& query, std::span<const ContextDoc> contexts,
                               const std::optional<std::string>& rvis);
PromptStream parametric_stream(const corpus::Query& query);

decoding::Prompt to_prompt(const PromptStream& stream, const std::set<std::size_t>& low_set, double alpha);

struct QueryOutcome {
  std::string qid;
  std::string prediction;
  RetrievalOutcome retrieval;
  std::optional<vccr::VccrResult> vccr;
  std::optional<vccr::RewriteResult> rewrite;
  std::optional<correlation::CorrelationProfile> profile;
  double K = 1.0;
  decoding::DecodeResult decode;
  decoding::Prompt contextual_prompt;
};

nlohmann::json to_json(const QueryOutcome& outcome, bool include_trace);

QueryOutcome answer_query(const corpus::Query& query, const World& world, const PipelineConfig& cfg);

}  // namespace ccvqa::pipeline
