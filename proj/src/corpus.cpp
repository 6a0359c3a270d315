#include "ccvqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::corpus {

using nlohmann::json;

void KnowledgeBase::add(KnowledgeEntry entry) {
  if (index_.contains(entry.entity_id)) {
    throw DuplicateIdError("duplicate entity_id '" + entry.entity_id + "'");
  }
  if (entry.image_embedding) {
    const std::size_t d = entry.image_embedding->size();
    if (dimension_ && *dimension_ != d) {
      throw ShapeError("entity '" + entry.entity_id + "' has embedding dimension " +
                       std::to_string(d) + ", KB uses " + std::to_string(*dimension_));
    }
    dimension_ = d;
  }
  index_.emplace(entry.entity_id, entries_.size());
  entries_.push_back(std::move(entry));
}

const KnowledgeEntry* KnowledgeBase::find(const std::string& entity_id) const {
  const auto it = index_.find(entity_id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

json to_json(const RetrievedContext& c) {
  return {{"context_id", c.context_id}, {"entity_id", c.entity_id},
          {"section_id", c.section_id}, {"text", c.text},
          {"retrieval_score", c.retrieval_score}, {"oracle", c.oracle}};
}

namespace {

template <typename OnRecord>
void for_each_jsonl(std::istream& in, OnRecord&& on_record) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      on_record(json::parse(line), lineno);
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

KnowledgeBase parse_knowledge_base(std::istream& in) {
  KnowledgeBase kb;
  for_each_jsonl(in, [&](const json& j, std::size_t lineno) {
    KnowledgeEntry e;
    e.entity_id = j.at("entity_id").get<std::string>();
    e.title = j.value("title", std::string{});
    for (const auto& s : j.at("sections")) {
      e.sections.push_back({s.at("id").get<std::string>(), s.at("text").get<std::string>()});
    }
    if (e.sections.empty()) throw ParseError(lineno, "entry has no sections");
    e.image_ref = j.value("image", std::string{});
    if (j.contains("image_embedding") && !j.at("image_embedding").is_null()) {
      e.image_embedding = j.at("image_embedding").get<clients::Vector>();
    }
    try {
      kb.add(std::move(e));
    } catch (const ShapeError& err) {
      throw ParseError(lineno, err.what());
    }
  });
  return kb;
}

KnowledgeBase load_knowledge_base(const std::string& path) {
  auto in = open_or_throw(path);
  auto kb = parse_knowledge_base(in);
  spdlog::info("loaded {} knowledge entries from {}", kb.size(), path);
  return kb;
}

std::vector<Query> parse_queries(std::istream& in) {
  std::vector<Query> out;
  std::unordered_set<std::string> seen;
  for_each_jsonl(in, [&](const json& j, std::size_t lineno) {
    Query q;
    q.qid = j.at("qid").get<std::string>();
    q.image_ref = j.value("image", std::string{});
    q.question = j.at("question").get<std::string>();
    if (j.contains("answers")) q.answers = j.at("answers").get<std::vector<std::string>>();
    if (j.contains("split")) q.split_tag = j.at("split").get<std::string>();
    if (trim(q.question).empty()) throw ParseError(lineno, "empty question");
    if (!seen.insert(q.qid).second) {
      throw DuplicateIdError("line " + std::to_string(lineno) + ": duplicate qid '" + q.qid + "'");
    }
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<Query> load_queries(const std::string& path) {
  auto in = open_or_throw(path);
  return parse_queries(in);
}

std::vector<RankedEntry> retrieve_top_k(const Query& query, const KnowledgeBase& kb, std::size_t k,
                                        const clients::EmbeddingProvider& embedder) {
  if (k == 0) throw ParameterError("retrieve_top_k: k must be >= 1");
  std::vector<RankedEntry> ranked;
  ranked.reserve(kb.size());
  try {
    const clients::Vector q = embedder.embed_image(query.image_ref);
    for (const auto& e : kb.entries()) {
      const clients::Vector v = e.image_embedding ? *e.image_embedding : embedder.embed_image(e.image_ref);
      ranked.push_back({&e, clients::cosine(q, v)});
    }
  } catch (const Error& err) {
    throw RetrievalError(std::string("retrieval failed for query '") + query.qid + "': " + err.what());
  }
  const std::size_t keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                    [](const RankedEntry& a, const RankedEntry& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.entry->entity_id < b.entry->entity_id;
                    });
  ranked.resize(keep);
  return ranked;
}

std::string context_id_for(const std::string& entity_id, const std::string& section_id) {
  return entity_id + "#" + section_id;
}

SectionSelection select_sections(std::span<const RankedEntry> entries, const Query& query,
                                 std::size_t n, const clients::EmbeddingProvider& embedder) {
  if (entries.empty()) throw ParameterError("select_sections: no entries");
  SectionSelection out;
  std::vector<RetrievedContext> all;
  try {
    const clients::Vector q = embedder.embed_text(query.question);
    for (const auto& ranked : entries) {
      for (const auto& s : ranked.entry->sections) {
        RetrievedContext c;
        c.entity_id = ranked.entry->entity_id;
        c.section_id = s.id;
        c.context_id = context_id_for(c.entity_id, c.section_id);
        c.text = s.text;
        c.retrieval_score = clients::cosine(q, embedder.embed_text(s.text));
        all.push_back(std::move(c));
      }
    }
  } catch (const Error& err) {
    throw RetrievalError(std::string("section scoring failed for query '") + query.qid + "': " +
                         err.what());
  }
  std::sort(all.begin(), all.end(), [](const RetrievedContext& a, const RetrievedContext& b) {
    if (a.retrieval_score != b.retrieval_score) return a.retrieval_score > b.retrieval_score;
    if (a.entity_id != b.entity_id) return a.entity_id < b.entity_id;
    return a.section_id < b.section_id;
  });
  if (n > all.size()) {
    spdlog::warn("query {}: requested {} sections but only {} exist", query.qid, n, all.size());
    out.truncated = true;
  } else {
    all.resize(n);
  }
  out.contexts = std::move(all);
  return out;
}

OracleResult oracle_insert(std::vector<RetrievedContext> contexts, RetrievedContext gt,
                           std::size_t slot) {
  if (contexts.empty()) throw ParameterError("oracle_insert: no contexts");
  OracleResult out;
  const bool present = std::any_of(contexts.begin(), contexts.end(), [&](const RetrievedContext& c) {
    return c.entity_id == gt.entity_id && c.section_id == gt.section_id;
  });
  if (present) {
    out.already_present = true;
    out.contexts = std::move(contexts);
    return out;
  }
  const std::size_t index = std::clamp<std::size_t>(slot, 1, contexts.size()) - 1;
  gt.oracle = true;
  if (gt.context_id.empty()) gt.context_id = context_id_for(gt.entity_id, gt.section_id);
  contexts[index] = std::move(gt);
  out.contexts = std::move(contexts);
  return out;
}

std::map<std::string, GroundTruth> load_ground_truth(const std::string& path) {
  auto in = open_or_throw(path);
  std::map<std::string, GroundTruth> out;
  for_each_jsonl(in, [&](const json& j, std::size_t) {
    out[j.at("qid").get<std::string>()] = {j.at("entity_id").get<std::string>(),
                                           j.at("section_id").get<std::string>()};
  });
  return out;
}

RetrievedContext ground_truth_context(const KnowledgeBase& kb, const GroundTruth& gt) {
  const KnowledgeEntry* e = kb.find(gt.entity_id);
  if (e != nullptr) {
    for (const auto& s : e->sections) {
      if (s.id == gt.section_id) {
        RetrievedContext c;
        c.entity_id = e->entity_id;
        c.section_id = s.id;
        c.context_id = context_id_for(c.entity_id, c.section_id);
        c.text = s.text;
        c.retrieval_score = 1.0;
        return c;
      }
    }
  }
  throw MappingError("ground-truth section " + gt.entity_id + "#" + gt.section_id +
                     " is not in the knowledge base");
}

}  // namespace ccvqa::corpus
