#include "ccvqa/pipeline.hpp"

#include <cmath>

#include <spdlog/spdlog.h>

#include "ccvqa/errors.hpp"
#include "ccvqa/prompts.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::pipeline {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::base: return "base";
    case Mode::rag: return "rag";
    case Mode::ccvqa: return "ccvqa";
    case Mode::oracle: return "oracle";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  if (s == "base") return Mode::base;
  if (s == "rag") return Mode::rag;
  if (s == "ccvqa") return Mode::ccvqa;
  if (s == "oracle") return Mode::oracle;
  throw ConfigError("unknown mode '" + s + "'");
}

Components PipelineConfig::effective_components() const {
  if (mode == Mode::base || mode == Mode::rag) return {false, false, false};
  return components;
}

void PipelineConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (!(cpe_alpha > 0.0 && cpe_alpha <= 1.0)) throw ConfigError("cpe_alpha must lie in (0, 1]");
  if (!std::isfinite(delta)) throw ConfigError("delta must be finite");
  if (top_k_articles == 0 || top_sections == 0) throw ConfigError("retrieval sizes must be positive");
  if (vccr_workers == 0) throw ConfigError("vccr_workers must be positive");
  if (sample && !(temperature > 0.0)) throw ConfigError("temperature must be positive");
}

RetrievalOutcome retrieve_contexts(const corpus::Query& query, const World& world, const PipelineConfig& cfg) {
  if (!world.kb || !world.embedder) throw PipelineError("retrieval needs a knowledge base and an embedder");
  RetrievalOutcome out;
  const auto ranked = corpus::retrieve_top_k(query, *world.kb, cfg.top_k_articles, *world.embedder);
  auto selection = corpus::select_sections(ranked, query, cfg.top_sections, *world.embedder);
  out.contexts = std::move(selection.contexts);
  out.truncated = selection.truncated;
  if (cfg.uses_oracle()) {
    if (!world.ground_truth) throw PipelineError("oracle mode needs ground-truth annotations");
    const auto it = world.ground_truth->find(query.qid);
    if (it == world.ground_truth->end()) {
      spdlog::warn("no ground-truth section for {}", query.qid);
    } else {
      auto inserted = corpus::oracle_insert(std::move(out.contexts),
                                            corpus::ground_truth_context(*world.kb, it->second), cfg.oracle_slot);
      out.contexts = std::move(inserted.contexts);
      out.oracle_inserted = !inserted.already_present;
    }
  }
  return out;
}

void PromptStream::add(std::string_view text, lm::Region region, std::optional<std::size_t> sentence) {
  for (const char c : text) {
    tokens.push_back({static_cast<lm::TokenId>(static_cast<unsigned char>(c)), region, sentence});
  }
}

std::vector<lm::TokenId> PromptStream::ids() const {
  std::vector<lm::TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.token);
  return out;
}

std::string PromptStream::text() const { return lm::bytes::decode(ids()); }

std::string image_line(const std::string& image_ref) { return "Image: " + image_ref + "\n"; }

void add_contexts(PromptStream& stream, std::span<const ContextDoc> contexts) {
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    const auto sentences = correlation::segment_sentences(contexts[c].text);
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      std::string piece = sentences[s];
      if (s + 1 < sentences.size()) {
        piece += ' ';
      } else if (c + 1 < contexts.size()) {
        piece += '\n';
      }
      stream.add(piece, lm::Region::context, stream.sentence_count);
      ++stream.sentence_count;
    }
  }
}

PromptStream contextual_stream(const corpus::Query& query, std::span<const ContextDoc> contexts,
                               const std::optional<std::string>& rvis) {
  PromptStream stream;
  stream.add(image_line(query.image_ref), lm::Region::query);
  if (rvis) {
    const auto parts = prompts::final_answer_parts(query.question);
    stream.add(parts.before_features, lm::Region::query);
    stream.add(*rvis, lm::Region::rvis);
    stream.add(parts.between, lm::Region::query);
    add_contexts(stream, contexts);
    stream.add(parts.after, lm::Region::query);
  } else {
    const auto parts = prompts::vanilla_answer_parts(query.question);
    stream.add(parts.before_information, lm::Region::query);
    add_contexts(stream, contexts);
    stream.add(parts.after, lm::Region::query);
  }
  return stream;
}

PromptStream parametric_stream(const corpus::Query& query) {
  PromptStream stream;
  stream.add(image_line(query.image_ref), lm::Region::query);
  stream.add(prompts::parametric_answer(query.question), lm::Region::query);
  return stream;
}

decoding::Prompt to_prompt(const PromptStream& stream, const std::set<std::size_t>& low_set, double alpha) {
  decoding::Prompt p;
  p.tokens = stream.ids();
  p.positions = lm::assign_positions(stream.tokens, low_set, stream.sentence_count, alpha);
  return p;
}

namespace {

std::string join_information(std::span<const ContextDoc> contexts) {
  PromptStream s;
  add_contexts(s, contexts);
  return s.text();
}

std::string chat_answer(const corpus::Query& query, std::span<const ContextDoc> contexts,
                        const std::optional<std::string>& rvis, bool retrieval, const World& world,
                        const PipelineConfig& cfg) {
  if (!world.vlm) throw PipelineError("chat generator needs a VLM client");
  std::string prompt;
  if (!retrieval) {
    prompt = prompts::parametric_answer(query.question);
  } else if (rvis) {
    prompt = prompts::final_answer(query.question, *rvis, join_information(contexts));
  } else {
    const auto parts = prompts::vanilla_answer_parts(query.question);
    prompt = parts.before_information + join_information(contexts) + parts.after;
  }
  auto request = clients::ChatRequest::user_prompt(prompt, query.image_ref);
  request.max_tokens = static_cast<int>(cfg.max_tokens);
  request.seed = static_cast<std::int64_t>(cfg.seed);
  return trim(world.vlm->chat(request));
}

}  // namespace

QueryOutcome answer_query(const corpus::Query& query, const World& world, const PipelineConfig& cfg) {
  cfg.validate();
  QueryOutcome out;
  out.qid = query.qid;
  const Components comp = cfg.effective_components();
  const bool retrieval = cfg.uses_retrieval();

  std::vector<ContextDoc> contexts;
  std::optional<std::string> rvis;
  if (retrieval) {
    out.retrieval = retrieve_contexts(query, world, cfg);
    if (comp.vccr) {
      if (!world.vlm) throw PipelineError("VCCR needs a VLM client");
      out.vccr = vccr::run_vccr(query, out.retrieval.contexts, *world.vlm, cfg.vccr_workers);
      contexts = out.vccr->contexts;
      rvis = out.vccr->summary.text;
    } else {
      contexts = vccr::retrieved_only(out.retrieval.contexts);
    }
  }

  if (cfg.generator == Generator::chat) {
    out.prediction = chat_answer(query, contexts, rvis, retrieval, world, cfg);
    return out;
  }
  if (!world.model) throw PipelineError("no language model configured");

  std::set<std::size_t> low_set;
  if (retrieval && (comp.cpe || comp.cad)) {
    std::string q_star = query.question;
    if (world.vlm) {
      out.rewrite = vccr::rewrite_question(query, *world.vlm);
      q_star = out.rewrite->question;
    }
    if (!world.embedder) throw PipelineError("correlation scoring needs an embedder");
    out.profile = correlation::build_profile(contexts, q_star, query.image_ref, *world.embedder, cfg.tau);
    if (comp.cpe) low_set = out.profile->low_set;
    out.K = out.profile->K;
  }

  const PromptStream parametric = parametric_stream(query);
  decoding::DecodeConfig dc;
  dc.max_tokens = cfg.max_tokens;
  dc.contrast = retrieval && comp.cad;
  dc.delta = cfg.delta;
  dc.sample = cfg.sample;
  dc.temperature = cfg.temperature;
  dc.seed = cfg.seed;
  if (retrieval) {
    const PromptStream contextual = contextual_stream(query, contexts, rvis);
    out.contextual_prompt = to_prompt(contextual, low_set, comp.cpe ? cfg.cpe_alpha : 1.0);
  } else {
    out.contextual_prompt = to_prompt(parametric, {}, 1.0);
  }
  out.decode = decoding::decode_answer(out.contextual_prompt, to_prompt(parametric, {}, 1.0), *world.model,
                                       out.K, dc);
  out.prediction = trim(out.decode.text);
  return out;
}

nlohmann::json to_json(const QueryOutcome& o, bool include_trace) {
  nlohmann::json j;
  j["qid"] = o.qid;
  j["prediction"] = o.prediction;
  nlohmann::json ctx = nlohmann::json::array();
  for (const auto& c : o.retrieval.contexts) ctx.push_back(corpus::to_json(c));
  j["contexts"] = ctx;
  j["oracle_inserted"] = o.retrieval.oracle_inserted;
  j["parametric_context"] = o.vccr ? nlohmann::json(o.vccr->parametric.text) : nlohmann::json(nullptr);
  j["rvis"] = o.vccr ? nlohmann::json(o.vccr->summary.text) : nlohmann::json(nullptr);
  j["q_star"] = o.rewrite ? nlohmann::json(o.rewrite->question) : nlohmann::json(nullptr);
  if (o.profile) {
    j["K"] = o.profile->K;
    j["sentences"] = o.profile->sentences.size();
    j["low_set"] = o.profile->low_set;
  } else {
    j["K"] = nullptr;
  }
  if (include_trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : o.decode.trace) steps.push_back(decoding::to_json(s));
    j["trace"] = steps;
  }
  return j;
}

}  // namespace ccvqa::pipeline
