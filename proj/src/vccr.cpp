#include "ccvqa/vccr.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <spdlog/spdlog.h>

#include "ccvqa/errors.hpp"
#include "ccvqa/prompts.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::vccr {
namespace {

std::string first_tag_pair(const std::string& text, const std::string& tag) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  const auto start = text.find(open);
  if (start == std::string::npos) throw TagError("no <" + tag + "> tag");
  const auto body = start + open.size();
  const auto end = text.find(close, body);
  if (end == std::string::npos) throw TagError("unbalanced <" + tag + "> tag");
  return text.substr(body, end - body);
}

std::string ask(const clients::ChatClient& vlm, const std::string& prompt,
                const corpus::Query& query) {
  return vlm.chat(clients::ChatRequest::user_prompt(prompt, query.image_ref));
}

}  // namespace

std::string parse_reason_tags(const std::string& text) { return first_tag_pair(text, "reason"); }

std::string parse_question_tags(const std::string& text) {
  return trim(first_tag_pair(text, "question"));
}

ParametricContext generate_parametric_context(const corpus::Query& query,
                                              const clients::ChatClient& vlm) {
  std::string reply = ask(vlm, prompts::parametric_context(query.question), query);
  if (trim(reply).empty()) {
    throw PipelineError("empty parametric context for query '" + query.qid + "'");
  }
  return {std::move(reply)};
}

std::vector<ContextDoc> merge_contexts(const ParametricContext& parametric,
                                       std::span<const corpus::RetrievedContext> retrieved) {
  std::vector<ContextDoc> out;
  out.reserve(retrieved.size() + 1);
  out.push_back({kParametricContextId, parametric.text, true});
  for (const auto& c : retrieved) out.push_back({c.context_id, c.text, false});
  return out;
}

std::vector<ContextDoc> retrieved_only(std::span<const corpus::RetrievedContext> retrieved) {
  std::vector<ContextDoc> out;
  out.reserve(retrieved.size());
  for (const auto& c : retrieved) out.push_back({c.context_id, c.text, false});
  return out;
}

RewriteResult rewrite_question(const corpus::Query& query, const clients::ChatClient& vlm) {
  const std::string reply = ask(vlm, prompts::question_rewrite(query.question), query);
  try {
    std::string q = parse_question_tags(reply);
    if (!q.empty()) return {std::move(q), false};
  } catch (const TagError&) {
  }
  spdlog::warn("query {}: rewritten question not tagged, keeping the original", query.qid);
  return {query.question, true};
}

RationaleRecord extract_rationale(const corpus::Query& query, const ContextDoc& context,
                                  const clients::ChatClient& vlm) {
  if (context.text.empty()) throw PipelineError("context '" + context.id + "' is empty");
  RationaleRecord r;
  r.context_id = context.id;
  r.raw_response = ask(vlm, prompts::visual_rationale(query.question, context.text), query);
  try {
    r.reason = parse_reason_tags(r.raw_response);
  } catch (const TagError&) {
    spdlog::warn("query {}: rationale for {} has no reason tags", query.qid, context.id);
    r.reason = r.raw_response;
    r.degraded = true;
  }
  return r;
}

std::vector<RationaleRecord> extract_rationales(const corpus::Query& query,
                                                std::span<const ContextDoc> contexts,
                                                const clients::ChatClient& vlm,
                                                std::size_t workers) {
  std::vector<RationaleRecord> out(contexts.size());
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, contexts.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < contexts.size(); ++i) out[i] = extract_rationale(query, contexts[i], vlm);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(contexts.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < contexts.size(); i = next++) {
          try {
            out[i] = extract_rationale(query, contexts[i], vlm);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

ConflictSummary summarize_conflicts(const corpus::Query& query,
                                    std::span<const RationaleRecord> rationales,
                                    const clients::ChatClient& vlm) {
  if (rationales.empty()) throw PipelineError("summarize_conflicts needs at least one rationale");
  std::string reasons;
  ConflictSummary s;
  for (const auto& r : rationales) {
    if (!reasons.empty()) reasons.push_back('\n');
    reasons += r.reason;
    s.source_rationales.push_back(r.context_id);
  }
  const std::string reply = ask(vlm, prompts::conflict_analysis(query.question, reasons), query);
  try {
    s.text = parse_reason_tags(reply);
  } catch (const TagError&) {
    spdlog::warn("query {}: conflict summary has no reason tags", query.qid);
    s.text = reply;
    s.degraded = true;
  }
  return s;
}

VccrResult run_vccr(const corpus::Query& query, std::span<const corpus::RetrievedContext> retrieved,
                    const clients::ChatClient& vlm, std::size_t workers) {
  VccrResult out;
  out.parametric = generate_parametric_context(query, vlm);
  out.contexts = merge_contexts(out.parametric, retrieved);
  out.rationales = extract_rationales(query, out.contexts, vlm, workers);
  out.summary = summarize_conflicts(query, out.rationales, vlm);
  return out;
}

}  // namespace ccvqa::vccr
