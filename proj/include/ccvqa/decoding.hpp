#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccvqa/language_model.hpp"

namespace ccvqa::decoding {

using Distribution = std::vector<double>;

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kDefaultDelta = 0.1;

// Log-sum-exp softmax. NumericError on non-finite input or an empty vector.
Distribution softmax(std::span<const double> logits);

// Shannon entropy in nats; zero-probability terms contribute nothing.
double entropy(std::span<const double> p);

// Jensen-Shannon divergence divided by log 2, in [0, 1].
double divergence(std::span<const double> p_c, std::span<const double> p_m);

// (H(p_m) - H(p_c)) / log V, in [-1, 1]. Zero when V = 1.
double entropy_gap(std::span<const double> p_c, std::span<const double> p_m);

double sigmoid(double x);
double conflict_score(double D, double dH, double K, double delta = kDefaultDelta);

// softmax((1 + s) z_c - s z_m), 0 <= s < 1.
Distribution blend(std::span<const double> logits_c, std::span<const double> logits_m, double s_prime);

struct ConflictSignals {
  double D = 0.0;
  double dH = 0.0;
  double K = 0.0;
  double delta = kDefaultDelta;
  double s_prime = 0.0;
};

ConflictSignals compute_signals(std::span<const double> logits_c, std::span<const double> logits_m, double K,
                                double delta);

struct StepTrace {
  std::size_t step = 0;
  std::optional<ConflictSignals> signals;  // empty when contrast is off
  lm::TokenId token = 0;
};

// One JSONL line per step: {"step","D","dH","K","s_prime","token_id"}.
nlohmann::json to_json(const StepTrace& step);
std::string trace_jsonl(std::span<const StepTrace> trace);

// A prompt ready for the model: tokens plus their positions.
struct Prompt {
  std::vector<lm::TokenId> tokens;
  lm::PositionMap positions;

  // Appends a generated token one step past the last position.
  void push_generated(lm::TokenId token);
};

struct DecodeConfig {
  std::size_t max_tokens = 32;
  bool contrast = true;  // adaptive decoding on
  double delta = kDefaultDelta;
  bool sample = false;   // greedy unless set
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct DecodeResult {
  std::vector<lm::TokenId> tokens;  // without end-of-sequence
  std::string text;
  std::vector<StepTrace> trace;
  bool stopped_at_eos = false;
};

// Greedy loop over the contextual pass, contrasted against the parametric
// pass when cfg.contrast is set. Each chosen token is appended to both
// prompts. Stops at end-of-sequence or after max_tokens steps.
DecodeResult decode_answer(Prompt contextual, Prompt parametric, const lm::LanguageModel& model, double K,
                           const DecodeConfig& cfg);

}  // namespace ccvqa::decoding
