#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccvqa/embedding.hpp"

namespace ccvqa::corpus {

struct Section {
  std::string id;
  std::string text;
};

struct KnowledgeEntry {
  std::string entity_id;
  std::string title;
  std::vector<Section> sections;
  std::string image_ref;
  std::optional<clients::Vector> image_embedding;
};

// Entries in file order. Immutable once loaded, so it can be shared between
// worker threads without locking.
class KnowledgeBase {
 public:
  // Throws DuplicateIdError on a repeated entity_id and ShapeError when a
  // precomputed embedding disagrees with the KB-wide dimension.
  void add(KnowledgeEntry entry);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<KnowledgeEntry>& entries() const { return entries_; }
  const KnowledgeEntry* find(const std::string& entity_id) const;
  std::optional<std::size_t> embedding_dimension() const { return dimension_; }

 private:
  std::vector<KnowledgeEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<std::size_t> dimension_;
};

struct Query {
  std::string qid;
  std::string image_ref;
  std::string question;
  std::vector<std::string> answers;
  std::optional<std::string> split_tag;
};

struct RetrievedContext {
  std::string context_id;
  std::string entity_id;
  std::string section_id;
  std::string text;
  double retrieval_score = 0.0;
  bool oracle = false;  // inserted by oracle_insert
};

nlohmann::json to_json(const RetrievedContext& c);

// One JSON object per line; blank lines are skipped. Errors carry the 1-based
// line number.
KnowledgeBase parse_knowledge_base(std::istream& in);
KnowledgeBase load_knowledge_base(const std::string& path);
std::vector<Query> parse_queries(std::istream& in);
std::vector<Query> load_queries(const std::string& path);

struct RankedEntry {
  const KnowledgeEntry* entry = nullptr;
  double score = 0.0;
};

// Exact cosine scan of the query image against every entry image. Sorted by
// descending score, ties by ascending entity_id; min(k, |KB|) results.
std::vector<RankedEntry> retrieve_top_k(const Query& query, const KnowledgeBase& kb, std::size_t k,
                                        const clients::EmbeddingProvider& embedder);

struct SectionSelection {
  std::vector<RetrievedContext> contexts;
  bool truncated = false;  // n exceeded the number of available sections
};

// Scores every section of `entries` by cosine(question, section text) and
// keeps the top n; ties by ascending (entity_id, section_id).
SectionSelection select_sections(std::span<const RankedEntry> entries, const Query& query,
                                 std::size_t n, const clients::EmbeddingProvider& embedder);

std::string context_id_for(const std::string& entity_id, const std::string& section_id);

struct OracleResult {
  std::vector<RetrievedContext> contexts;
  bool already_present = false;
};

// Puts the ground-truth section at rank `slot` (1-based, clamped to the list
// length) by replacing what was there. A no-op when gt is already present.
OracleResult oracle_insert(std::vector<RetrievedContext> contexts, RetrievedContext gt,
                           std::size_t slot = 3);

// Ground-truth section annotations: {"qid", "entity_id", "section_id"} per line.
struct GroundTruth {
  std::string entity_id;
  std::string section_id;
};
std::map<std::string, GroundTruth> load_ground_truth(const std::string& path);

// Builds the context record for an annotated section; MappingError if absent.
RetrievedContext ground_truth_context(const KnowledgeBase& kb, const GroundTruth& gt);

}  // namespace ccvqa::corpus
