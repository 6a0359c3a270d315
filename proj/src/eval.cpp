#include "ccvqa/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::eval {

std::string to_string(ScoreRule r) { return r == ScoreRule::exact_relaxed ? "exact_relaxed" : "vqa_soft"; }

ScoreRule score_rule_from_string(const std::string& s) {
  if (s == "exact_relaxed") return ScoreRule::exact_relaxed;
  if (s == "vqa_soft") return ScoreRule::vqa_soft;
  throw ConfigError("unknown scoring rule '" + s + "'");
}

std::string normalize_answer(std::string_view text) {
  std::string lowered = to_lower(text);
  while (!lowered.empty()) {
    const char c = lowered.back();
    if (std::isspace(static_cast<unsigned char>(c)) || c == '.' || c == ',' || c == '!' || c == '?' ||
        c == ';' || c == ':') {
      lowered.pop_back();
    } else {
      break;
    }
  }
  std::istringstream words(lowered);
  std::string word;
  std::string out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

namespace {

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

void require_gold(std::span<const std::string> gold) {
  if (gold.empty()) throw ScoringError("no gold answers to score against");
}

}  // namespace

bool exact_relaxed(std::string_view prediction, std::span<const std::string> gold, bool numeric_tolerance) {
  require_gold(gold);
  const std::string p = normalize_answer(prediction);
  const auto p_num = numeric_tolerance ? parse_number(p) : std::nullopt;
  for (const auto& g : gold) {
    const std::string n = normalize_answer(g);
    if (n == p) return true;
    if (p_num) {
      const auto g_num = parse_number(n);
      if (g_num && std::abs(*p_num - *g_num) <= 0.1 * std::abs(*g_num)) return true;
    }
  }
  return false;
}

double vqa_soft(std::string_view prediction, std::span<const std::string> gold) {
  require_gold(gold);
  const std::string p = normalize_answer(prediction);
  const auto matches = std::count_if(gold.begin(), gold.end(),
                                     [&](const std::string& g) { return normalize_answer(g) == p; });
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

double score_answer(std::string_view prediction, std::span<const std::string> gold, ScoreRule rule,
                    bool numeric_tolerance) {
  if (rule == ScoreRule::vqa_soft) return vqa_soft(prediction, gold);
  return exact_relaxed(prediction, gold, numeric_tolerance) ? 1.0 : 0.0;
}

nlohmann::json to_json(const EvalRecord& r) {
  nlohmann::json j = {{"qid", r.qid},         {"prediction", r.prediction}, {"gold", r.gold},
                      {"score", r.score},     {"correct", r.correct},       {"mode", pipeline::to_string(r.mode)},
                      {"failed", r.failed}};
  if (r.failed) j["error"] = r.error;
  return j;
}

HelpfulHarmful helpful_harmful(std::span<const EvalRecord> base, std::span<const EvalRecord> rag) {
  std::map<std::string, bool> base_correct;
  for (const auto& r : base) {
    if (!base_correct.emplace(r.qid, r.correct).second) throw PairingError("duplicate qid " + r.qid + " in base run");
  }
  if (base.size() != rag.size()) throw PairingError("runs differ in size");
  std::set<std::string> seen;
  std::size_t helpful = 0;
  std::size_t harmful = 0;
  for (const auto& r : rag) {
    const auto it = base_correct.find(r.qid);
    if (it == base_correct.end()) throw PairingError("qid " + r.qid + " has no base record");
    if (!seen.insert(r.qid).second) throw PairingError("duplicate qid " + r.qid + " in compared run");
    if (!it->second && r.correct) ++helpful;
    if (it->second && !r.correct) ++harmful;
  }
  if (rag.empty()) return {};
  const double n = static_cast<double>(rag.size());
  return {static_cast<double>(helpful) / n, static_cast<double>(harmful) / n};
}

SimilarityStats similarity_stats(std::span<const correlation::CorrelationProfile> profiles,
                                 const StatsOptions& options, std::span<const std::vector<std::string>> gold) {
  if (options.bins == 0 || !(options.high > options.low)) throw ParameterError("invalid histogram range");
  if (!gold.empty() && gold.size() != profiles.size()) throw ShapeError("one gold list per profile expected");
  SimilarityStats stats;
  const double width = (options.high - options.low) / static_cast<double>(options.bins);
  for (std::size_t b = 0; b < options.bins; ++b) {
    stats.histogram.push_back({options.low + width * static_cast<double>(b),
                               b + 1 == options.bins ? options.high : options.low + width * static_cast<double>(b + 1),
                               0});
  }
  std::vector<double> scores;
  std::size_t contexts = 0;
  std::size_t gold_total = 0;
  std::size_t gold_top = 0;
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const auto& profile = profiles[p];
    std::set<std::string> ids;
    for (const auto& s : profile.sentences) {
      scores.push_back(s.score);
      ids.insert(s.context_id);
    }
    contexts += ids.size();
    if (gold.empty()) continue;
    const auto outside_top = correlation::low_correlation_set(profile.sentences, 0.75);
    std::vector<std::string> answers;
    for (const auto& g : gold[p]) {
      const auto n = normalize_answer(g);
      if (!n.empty()) answers.push_back(n);
    }
    for (const auto& s : profile.sentences) {
      const std::string text = normalize_answer(s.text);
      const bool bearing = std::any_of(answers.begin(), answers.end(),
                                       [&](const std::string& a) { return contains(text, a); });
      if (!bearing) continue;
      ++gold_total;
      if (!outside_top.contains(s.global_index)) ++gold_top;
    }
  }
  stats.sentences = scores.size();
  if (!scores.empty()) {
    double sum = 0.0;
    for (const double s : scores) sum += s;
    stats.mean = sum / static_cast<double>(scores.size());
    double var = 0.0;
    for (const double s : scores) var += (s - stats.mean) * (s - stats.mean);
    stats.stddev = std::sqrt(var / static_cast<double>(scores.size()));
    for (const double s : scores) {
      auto b = static_cast<std::ptrdiff_t>(std::floor((s - options.low) / width));
      b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(options.bins) - 1);
      ++stats.histogram[static_cast<std::size_t>(b)].count;
    }
  }
  if (contexts > 0) stats.sentences_per_context = static_cast<double>(scores.size()) / static_cast<double>(contexts);
  if (gold_total > 0) stats.gold_in_top_band = static_cast<double>(gold_top) / static_cast<double>(gold_total);
  return stats;
}

std::string histogram_csv(const SimilarityStats& stats) {
  std::string out = "bin_left,bin_right,count\n";
  for (const auto& b : stats.histogram) out += fmt::format("{},{},{}\n", b.left, b.right, b.count);
  return out;
}

nlohmann::json to_json(const SimilarityStats& s) {
  nlohmann::json j = {{"sentences", s.sentences},
                      {"mean", s.mean},
                      {"stddev", s.stddev},
                      {"sentences_per_context", s.sentences_per_context},
                      {"gold_in_top_band", s.gold_in_top_band ? nlohmann::json(*s.gold_in_top_band) : nlohmann::json()},
                      {"published_reference", {{"mean", 0.4}, {"stddev", 0.15}, {"gold_in_top_band", 0.9}}}};
  return j;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"mode", pipeline::to_string(r.mode)},
          {"label", r.label},
          {"n", r.n},
          {"accuracy", r.accuracy},
          {"base_accuracy", r.base_accuracy},
          {"helpful_ratio", r.helpful_ratio},
          {"harmful_ratio", r.harmful_ratio},
          {"failures", r.failures},
          {"interrupted", r.interrupted},
          {"metric", to_string(r.rule)},
          {"metric_note", kMetricNote},
          {"config", r.config}};
}

RunRecords run_queries(std::span<const corpus::Query> queries, const pipeline::World& world,
                       const pipeline::PipelineConfig& cfg, const ExperimentOptions& options) {
  const std::size_t n = queries.size();
  std::vector<std::optional<EvalRecord>> slots(n);
  RunRecords out;
  out.outcomes.resize(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> interrupted{false};

  auto work = [&] {
    for (;;) {
      if (options.stop && options.stop->load()) {
        interrupted = true;
        return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const auto& q = queries[i];
      EvalRecord rec;
      rec.qid = q.qid;
      rec.gold = q.answers;
      rec.mode = cfg.mode;
      try {
        auto outcome = pipeline::answer_query(q, world, cfg);
        rec.prediction = outcome.prediction;
        out.outcomes[i] = std::move(outcome);
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        spdlog::warn("query {} failed: {}", q.qid, e.what());
      }
      if (!rec.failed && !rec.gold.empty()) {
        rec.score = score_answer(rec.prediction, rec.gold, options.rule, options.numeric_tolerance);
      }
      rec.correct = rec.score >= 1.0;
      slots[i] = std::move(rec);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, n));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& s : slots) {
    if (s) out.records.push_back(std::move(*s));
  }
  out.interrupted = interrupted.load();
  return out;
}

EvalReport summarize(std::span<const EvalRecord> records, std::span<const EvalRecord> base_records,
                     const pipeline::PipelineConfig& cfg, const ExperimentOptions& options, nlohmann::json config) {
  EvalReport r;
  r.mode = cfg.mode;
  r.rule = options.rule;
  r.n = records.size();
  r.config = std::move(config);
  double total = 0.0;
  for (const auto& rec : records) {
    total += rec.score;
    if (rec.failed) ++r.failures;
  }
  if (r.n > 0) r.accuracy = total / static_cast<double>(r.n);
  double base_total = 0.0;
  for (const auto& rec : base_records) base_total += rec.score;
  if (!base_records.empty()) r.base_accuracy = base_total / static_cast<double>(base_records.size());
  if (!base_records.empty()) {
    const auto hh = helpful_harmful(base_records, records);
    r.helpful_ratio = hh.helpful;
    r.harmful_ratio = hh.harmful;
  }
  return r;
}

namespace {

// Base records restricted to the qids present in `records`.
std::vector<EvalRecord> paired_base(std::span<const EvalRecord> base, std::span<const EvalRecord> records) {
  std::set<std::string> wanted;
  for (const auto& r : records) wanted.insert(r.qid);
  std::vector<EvalRecord> out;
  for (const auto& b : base) {
    if (wanted.contains(b.qid)) out.push_back(b);
  }
  return out;
}

}  // namespace

Experiment run_experiment(std::span<const corpus::Query> queries, const pipeline::World& world,
                          const pipeline::PipelineConfig& cfg, const ExperimentOptions& options,
                          nlohmann::json config_echo) {
  if (queries.empty()) throw ConfigError("no queries to evaluate");
  Experiment ex;
  ex.run = run_queries(queries, world, cfg, options);
  if (cfg.mode == pipeline::Mode::base) {
    ex.base = ex.run;
  } else {
    pipeline::PipelineConfig base_cfg = cfg;
    base_cfg.mode = pipeline::Mode::base;
    base_cfg.oracle = false;
    ex.base = run_queries(queries, world, base_cfg, options);
  }
  const auto base = paired_base(ex.base.records, ex.run.records);
  ex.report = summarize(ex.run.records, base, cfg, options, std::move(config_echo));
  ex.report.label = pipeline::to_string(cfg.mode);
  ex.report.interrupted = ex.run.interrupted || ex.base.interrupted;
  return ex;
}

std::vector<double> alpha_values() { return {0.1, 0.3, 0.5, 0.7, 0.9, 1.0}; }
std::vector<double> tau_values() { return {0.25, 0.5, 0.75}; }

std::vector<GridPoint> alpha_grid(const pipeline::PipelineConfig& base) {
  std::vector<GridPoint> out;
  for (const double a : alpha_values()) {
    GridPoint p{"alpha", fmt::format("alpha={}", a), base};
    p.cfg.mode = pipeline::Mode::ccvqa;
    p.cfg.components = {};
    p.cfg.cpe_alpha = a;
    out.push_back(p);
  }
  return out;
}

std::vector<GridPoint> tau_grid(const pipeline::PipelineConfig& base) {
  std::vector<GridPoint> out;
  for (const double t : tau_values()) {
    GridPoint p{"tau", fmt::format("tau={}", t), base};
    p.cfg.mode = pipeline::Mode::ccvqa;
    p.cfg.components = {};
    p.cfg.tau = t;
    out.push_back(p);
  }
  return out;
}

std::vector<GridPoint> component_grid(const pipeline::PipelineConfig& base) {
  const std::vector<std::pair<std::string, pipeline::Components>> rows = {
      {"none", {false, false, false}},
      {"VCCR", {true, false, false}},
      {"VCCR+CAD", {true, false, true}},
      {"VCCR+CAD+CPE", {true, true, true}},
  };
  std::vector<GridPoint> out;
  for (const auto& [label, comp] : rows) {
    GridPoint p{"components", label, base};
    p.cfg.mode = pipeline::Mode::ccvqa;
    p.cfg.components = comp;
    out.push_back(p);
  }
  return out;
}

AblationResult run_ablation(std::span<const corpus::Query> queries, const pipeline::World& world,
                            std::span<const GridPoint> points, const ExperimentOptions& options,
                            const std::function<nlohmann::json(const pipeline::PipelineConfig&)>& echo) {
  if (queries.empty()) throw ConfigError("no queries to evaluate");
  AblationResult result;
  result.points.assign(points.begin(), points.end());
  std::optional<RunRecords> base;
  for (const auto& point : points) {
    if (options.stop && options.stop->load()) break;
    if (!base) {
      pipeline::PipelineConfig base_cfg = point.cfg;
      base_cfg.mode = pipeline::Mode::base;
      base_cfg.oracle = false;
      base = run_queries(queries, world, base_cfg, options);
    }
    const auto run = run_queries(queries, world, point.cfg, options);
    const auto paired = paired_base(base->records, run.records);
    EvalReport report = summarize(run.records, paired, point.cfg, options, echo(point.cfg));
    report.label = point.grid + ":" + point.label;
    report.interrupted = run.interrupted;
    result.reports.push_back(std::move(report));
  }
  result.points.resize(result.reports.size());
  return result;
}

std::string ablation_table_csv(const AblationResult& result) {
  std::string out = "grid,label,accuracy,helpful_ratio,harmful_ratio,failures\n";
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& r = result.reports[i];
    out += fmt::format("{},{},{},{},{},{}\n", result.points[i].grid, result.points[i].label, r.accuracy,
                       r.helpful_ratio, r.harmful_ratio, r.failures);
  }
  return out;
}

nlohmann::json ablation_table_json(const AblationResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& r = result.reports[i];
    rows.push_back({{"grid", result.points[i].grid},
                    {"label", result.points[i].label},
                    {"accuracy", r.accuracy},
                    {"helpful_ratio", r.helpful_ratio},
                    {"harmful_ratio", r.harmful_ratio},
                    {"failures", r.failures}});
  }
  return {{"metric_note", kMetricNote}, {"rows", rows}};
}

}  // namespace ccvqa::eval
