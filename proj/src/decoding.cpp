#include "ccvqa/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::decoding {

Distribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw NumericError("softmax of an empty vector");
  double mx = -INFINITY;
  for (const double z : logits) {
    if (!std::isfinite(z)) throw NumericError("non-finite logit");
    mx = std::max(mx, z);
  }
  Distribution p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (const double v : p) {
    if (v > 0.0) h -= v * std::log(std::max(v, kProbFloor));
  }
  return h;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distributions differ in length");
  if (a.empty()) throw ShapeError("empty distribution");
}

double kl_to_mixture(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    const double m = 0.5 * (p[i] + q[i]);
    kl += p[i] * (std::log(std::max(p[i], kProbFloor)) - std::log(std::max(m, kProbFloor)));
  }
  return kl;
}

}  // namespace

double divergence(std::span<const double> p_c, std::span<const double> p_m) {
  check_pair(p_c, p_m);
  const double js = 0.5 * kl_to_mixture(p_c, p_m) + 0.5 * kl_to_mixture(p_m, p_c);
  return std::clamp(js / std::log(2.0), 0.0, 1.0);
}

double entropy_gap(std::span<const double> p_c, std::span<const double> p_m) {
  check_pair(p_c, p_m);
  if (p_c.size() == 1) return 0.0;
  const double gap = (entropy(p_m) - entropy(p_c)) / std::log(static_cast<double>(p_c.size()));
  return std::clamp(gap, -1.0, 1.0);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double conflict_score(double D, double dH, double K, double delta) {
  if (!std::isfinite(D) || !std::isfinite(dH) || !std::isfinite(K) || !std::isfinite(delta)) {
    throw NumericError("conflict score inputs must be finite");
  }
  return sigmoid(D + dH + K + delta);
}

Distribution blend(std::span<const double> logits_c, std::span<const double> logits_m, double s_prime) {
  if (logits_c.size() != logits_m.size()) throw ShapeError("logit vectors differ in length");
  if (!(s_prime >= 0.0 && s_prime < 1.0)) throw ParameterError("s_prime must lie in [0, 1)");
  std::vector<double> z(logits_c.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(logits_c[i]) || !std::isfinite(logits_m[i])) throw NumericError("non-finite logit");
    z[i] = (1.0 + s_prime) * logits_c[i] - s_prime * logits_m[i];
  }
  return softmax(z);
}

ConflictSignals compute_signals(std::span<const double> logits_c, std::span<const double> logits_m, double K,
                                double delta) {
  const Distribution p_c = softmax(logits_c);
  const Distribution p_m = softmax(logits_m);
  ConflictSignals s;
  s.D = divergence(p_c, p_m);
  s.dH = entropy_gap(p_c, p_m);
  s.K = K;
  s.delta = delta;
  s.s_prime = conflict_score(s.D, s.dH, s.K, s.delta);
  return s;
}

nlohmann::json to_json(const StepTrace& step) {
  nlohmann::json j;
  j["step"] = step.step;
  if (step.signals) {
    j["D"] = step.signals->D;
    j["dH"] = step.signals->dH;
    j["K"] = step.signals->K;
    j["s_prime"] = step.signals->s_prime;
  } else {
    j["D"] = nullptr;
    j["dH"] = nullptr;
    j["K"] = nullptr;
    j["s_prime"] = nullptr;
  }
  j["token_id"] = step.token;
  return j;
}

std::string trace_jsonl(std::span<const StepTrace> trace) {
  std::string out;
  for (const auto& s : trace) out += to_json(s).dump() + "\n";
  return out;
}

void Prompt::push_generated(lm::TokenId token) {
  tokens.push_back(token);
  positions.append(lm::Region::generated, 1.0);
}

namespace {

lm::TokenId argmax(const Distribution& p) {
  return static_cast<lm::TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
}

lm::TokenId sample_from(const Distribution& p, double temperature, std::mt19937_64& rng) {
  if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
  std::vector<double> logits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) logits[i] = std::log(std::max(p[i], kProbFloor)) / temperature;
  const Distribution q = softmax(logits);
  const double u = 0.5 * (uniform_pm1(rng) + 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    acc += q[i];
    if (u < acc) return static_cast<lm::TokenId>(i);
  }
  return static_cast<lm::TokenId>(q.size() - 1);
}

}  // namespace

DecodeResult decode_answer(Prompt contextual, Prompt parametric, const lm::LanguageModel& model, double K,
                           const DecodeConfig& cfg) {
  if (!std::isfinite(K) || K < 0.0 || K > 1.0) throw ParameterError("K must lie in [0, 1]");
  std::mt19937_64 rng(cfg.seed);
  DecodeResult result;
  for (std::size_t step = 0; step < cfg.max_tokens; ++step) {
    const lm::Logits z_c = model.next_token_logits(contextual.tokens, contextual.positions);
    StepTrace trace;
    trace.step = step;
    Distribution p;
    if (cfg.contrast) {
      const lm::Logits z_m = model.next_token_logits(parametric.tokens, parametric.positions);
      const ConflictSignals signals = compute_signals(z_c, z_m, K, cfg.delta);
      p = blend(z_c, z_m, signals.s_prime);
      trace.signals = signals;
    } else {
      p = softmax(z_c);
    }
    const lm::TokenId token = cfg.sample ? sample_from(p, cfg.temperature, rng) : argmax(p);
    trace.token = token;
    result.trace.push_back(trace);
    if (token == model.eos_token()) {
      result.stopped_at_eos = true;
      break;
    }
    result.tokens.push_back(token);
    contextual.push_generated(token);
    parametric.push_generated(token);
  }
  result.text = lm::bytes::decode(result.tokens);
  return result;
}

}  // namespace ccvqa::decoding
