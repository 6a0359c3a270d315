#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccvqa/context.hpp"
#include "ccvqa/embedding.hpp"

namespace ccvqa::correlation {

struct ScoredSentence {
  std::size_t global_index = 0;  // contiguous across the whole context set
  std::string context_id;
  std::string text;
  double score = 0.0;          // raw mean of the two cosines, in [-1, 1]
  double clamped_score = 0.0;  // max(score, 0)
};

struct CorrelationProfile {
  std::vector<ScoredSentence> sentences;  // all contexts, original order
  std::set<std::size_t> low_set;          // global indices
  double tau = 0.0;
  double K = 1.0;

  bool in_low_set(std::size_t global_index) const { return low_set.contains(global_index); }
};

// Splits after '.', '!' or '?' when followed by whitespace or the end of the
// text. Terminators stay with their sentence, segments are trimmed and empty
// ones dropped. Abbreviations get no special treatment.
std::vector<std::string> segment_sentences(std::string_view text);

// Mean of cosine(Q*, s) and cosine(I, s).
double score_sentence(const std::string& sentence, const std::string& q_star,
                      const std::string& image_ref, const clients::EmbeddingProvider& embedder);

// Segments and scores every context; the query-side embeddings are computed once.
std::vector<ScoredSentence> score_contexts(std::span<const ContextDoc> contexts,
                                           const std::string& q_star, const std::string& image_ref,
                                           const clients::EmbeddingProvider& embedder);

// floor(tau * N) indices with the lowest clamped scores. The ranking is by
// descending clamped score with ties broken by ascending global index, and
// the set is the tail of that ranking.
std::set<std::size_t> low_correlation_set(std::span<const ScoredSentence> sentences, double tau);
std::size_t low_set_size(std::size_t n, double tau);

// K = 1 - mean(r) * (1 - H(p) / log M), p = r / sum(r).
// sum(r) = 0 gives concentration 0; M = 1 gives concentration 1.
double aggregate_K(std::span<const double> clamped_scores);
double concentration(std::span<const double> clamped_scores);

CorrelationProfile build_profile(std::span<const ContextDoc> contexts, const std::string& q_star,
                                 const std::string& image_ref,
                                 const clients::EmbeddingProvider& embedder, double tau);

// Profile assembled from already-scored sentences.
CorrelationProfile profile_from_scores(std::vector<ScoredSentence> sentences, double tau);

// Diagnostic dump: global_index,context_id,score,clamped_score,in_low_set
std::string profile_csv(const CorrelationProfile& profile);

}  // namespace ccvqa::correlation
