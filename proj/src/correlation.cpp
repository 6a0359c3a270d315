#include "ccvqa/correlation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::correlation {
namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::vector<std::string> segment_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminator(text[i])) continue;
    const bool at_end = i + 1 == text.size();
    if (!at_end && std::isspace(static_cast<unsigned char>(text[i + 1])) == 0) continue;
    std::string s = trim(text.substr(start, i + 1 - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = i + 1;
  }
  if (start < text.size()) {
    std::string s = trim(text.substr(start));
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

double score_sentence(const std::string& sentence, const std::string& q_star,
                      const std::string& image_ref, const clients::EmbeddingProvider& embedder) {
  if (sentence.empty()) throw ScoringError("cannot score an empty sentence");
  try {
    const auto s = embedder.embed_text(sentence);
    return 0.5 * (clients::cosine(embedder.embed_text(q_star), s) +
                  clients::cosine(embedder.embed_image(image_ref), s));
  } catch (const Error& e) {
    throw ScoringError(std::string("sentence scoring failed: ") + e.what());
  }
}

std::vector<ScoredSentence> score_contexts(std::span<const ContextDoc> contexts,
                                           const std::string& q_star, const std::string& image_ref,
                                           const clients::EmbeddingProvider& embedder) {
  std::vector<ScoredSentence> out;
  try {
    const auto q = embedder.embed_text(q_star);
    const auto img = embedder.embed_image(image_ref);
    for (const auto& ctx : contexts) {
      for (auto& sentence : segment_sentences(ctx.text)) {
        const auto s = embedder.embed_text(sentence);
        ScoredSentence scored;
        scored.global_index = out.size();
        scored.context_id = ctx.id;
        scored.score = 0.5 * (clients::cosine(q, s) + clients::cosine(img, s));
        scored.clamped_score = std::max(scored.score, 0.0);
        scored.text = std::move(sentence);
        out.push_back(std::move(scored));
      }
    }
  } catch (const Error& e) {
    throw ScoringError(std::string("sentence scoring failed: ") + e.what());
  }
  return out;
}

std::size_t low_set_size(std::size_t n, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("tau must lie in [0, 1]");
  // The epsilon absorbs representation error in decimal tau values (0.29 * 100).
  const auto b = static_cast<std::size_t>(std::floor(tau * static_cast<double>(n) + 1e-9));
  return std::min(b, n);
}

std::set<std::size_t> low_correlation_set(std::span<const ScoredSentence> sentences, double tau) {
  const std::size_t b = low_set_size(sentences.size(), tau);
  std::vector<const ScoredSentence*> ranked;
  ranked.reserve(sentences.size());
  for (const auto& s : sentences) ranked.push_back(&s);
  std::sort(ranked.begin(), ranked.end(), [](const ScoredSentence* a, const ScoredSentence* b) {
    if (a->clamped_score != b->clamped_score) return a->clamped_score > b->clamped_score;
    return a->global_index < b->global_index;
  });
  std::set<std::size_t> low;
  for (std::size_t i = ranked.size() - b; i < ranked.size(); ++i) low.insert(ranked[i]->global_index);
  return low;
}

double concentration(std::span<const double> r) {
  if (r.empty()) throw AggregationError("cannot aggregate an empty score list");
  for (const double x : r) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw AggregationError("scores must be finite and >= 0");
  }
  if (r.size() == 1) return 1.0;
  const double sum = std::accumulate(r.begin(), r.end(), 0.0);
  if (sum == 0.0) return 0.0;
  // Equal weights are the maximum-entropy profile by definition.
  if (std::all_of(r.begin(), r.end(), [&](double x) { return x == r.front(); })) return 0.0;
  double h = 0.0;
  for (const double x : r) {
    const double p = x / sum;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(1.0 - h / std::log(static_cast<double>(r.size())), 0.0, 1.0);
}

double aggregate_K(std::span<const double> r) {
  const double c = concentration(r);
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  return std::clamp(1.0 - mean * c, 0.0, 1.0);
}

CorrelationProfile profile_from_scores(std::vector<ScoredSentence> sentences, double tau) {
  CorrelationProfile p;
  p.tau = tau;
  p.low_set = low_correlation_set(sentences, tau);
  if (!sentences.empty()) {
    std::vector<double> clamped;
    clamped.reserve(sentences.size());
    for (const auto& s : sentences) clamped.push_back(s.clamped_score);
    p.K = aggregate_K(clamped);
  }
  p.sentences = std::move(sentences);
  return p;
}

CorrelationProfile build_profile(std::span<const ContextDoc> contexts, const std::string& q_star,
                                 const std::string& image_ref,
                                 const clients::EmbeddingProvider& embedder, double tau) {
  return profile_from_scores(score_contexts(contexts, q_star, image_ref, embedder), tau);
}

std::string profile_csv(const CorrelationProfile& profile) {
  std::string out = "global_index,context_id,score,clamped_score,in_low_set\n";
  for (const auto& s : profile.sentences) {
    out += fmt::format("{},{},{:.17g},{:.17g},{}\n", s.global_index, s.context_id, s.score,
                       s.clamped_score, profile.in_low_set(s.global_index) ? 1 : 0);
  }
  return out;
}

}  // namespace ccvqa::correlation
