#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccvqa/chat.hpp"
#include "ccvqa/context.hpp"
#include "ccvqa/corpus.hpp"

namespace ccvqa::vccr {

struct ParametricContext {
  std::string text;
  static constexpr const char* source = "parametric";
};

struct RationaleRecord {
  std::string context_id;
  std::string raw_response;
  std::string reason;     // contents of the first <reason> pair
  bool degraded = false;  // no tags: reason holds the whole response
};

struct ConflictSummary {
  std::string text;
  std::vector<std::string> source_rationales;  // context ids, in order
  bool degraded = false;
};

struct RewriteResult {
  std::string question;
  bool fallback = false;  // tags missing, original question kept
};

// Content of the first <reason>...</reason> pair. Throws TagError when there
// is no complete pair.
std::string parse_reason_tags(const std::string& text);
// Same rule for <question>...</question>; the result is trimmed.
std::string parse_question_tags(const std::string& text);

// Asks the VLM for its own account of the image. Throws PipelineError on an
// empty reply.
ParametricContext generate_parametric_context(const corpus::Query& query,
                                              const clients::ChatClient& vlm);

// The context set: parametric context first, then retrieved contexts in rank order.
std::vector<ContextDoc> merge_contexts(const ParametricContext& parametric,
                                       std::span<const corpus::RetrievedContext> retrieved);
std::vector<ContextDoc> retrieved_only(std::span<const corpus::RetrievedContext> retrieved);

RewriteResult rewrite_question(const corpus::Query& query, const clients::ChatClient& vlm);

RationaleRecord extract_rationale(const corpus::Query& query, const ContextDoc& context,
                                  const clients::ChatClient& vlm);

// One record per context, in context order. Calls run on up to `workers` threads.
std::vector<RationaleRecord> extract_rationales(const corpus::Query& query,
                                                std::span<const ContextDoc> contexts,
                                                const clients::ChatClient& vlm,
                                                std::size_t workers = 1);

// Reasons are joined with newlines in the given order.
ConflictSummary summarize_conflicts(const corpus::Query& query,
                                    std::span<const RationaleRecord> rationales,
                                    const clients::ChatClient& vlm);

struct VccrResult {
  ParametricContext parametric;
  std::vector<ContextDoc> contexts;
  std::vector<RationaleRecord> rationales;
  ConflictSummary summary;
};

VccrResult run_vccr(const corpus::Query& query, std::span<const corpus::RetrievedContext> retrieved,
                    const clients::ChatClient& vlm, std::size_t workers = 1);

}  // namespace ccvqa::vccr
