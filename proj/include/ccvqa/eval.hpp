#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccvqa/correlation.hpp"
#include "ccvqa/pipeline.hpp"

namespace ccvqa::eval {

enum class ScoreRule { exact_relaxed, vqa_soft };
std::string to_string(ScoreRule r);
ScoreRule score_rule_from_string(const std::string& s);

// Lowercase, drop the articles a/an/the, collapse whitespace, strip trailing punctuation.
std::string normalize_answer(std::string_view text);

// With numeric_tolerance, parseable numbers within 10% of a gold number also match.
bool exact_relaxed(std::string_view prediction, std::span<const std::string> gold, bool numeric_tolerance = false);
// min(#matching annotator answers / 3, 1).
double vqa_soft(std::string_view prediction, std::span<const std::string> gold);
// ScoringError on empty gold. exact_relaxed yields 0 or 1.
double score_answer(std::string_view prediction, std::span<const std::string> gold, ScoreRule rule,
                    bool numeric_tolerance = false);

struct EvalRecord {
  std::string qid;
  std::string prediction;
  std::vector<std::string> gold;
  double score = 0.0;
  bool correct = false;  // score == 1
  pipeline::Mode mode = pipeline::Mode::ccvqa;
  bool failed = false;
  std::string error;
};

nlohmann::json to_json(const EvalRecord& r);

struct HelpfulHarmful {
  double helpful = 0.0;
  double harmful = 0.0;
};

// Paired by qid. PairingError when the qid sets differ.
HelpfulHarmful helpful_harmful(std::span<const EvalRecord> base, std::span<const EvalRecord> rag);

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

struct SimilarityStats {
  std::vector<HistogramBin> histogram;
  std::size_t sentences = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double sentences_per_context = 0.0;
  std::optional<double> gold_in_top_band;  // fraction of gold-bearing sentences in the top 25%
};

struct StatsOptions {
  std::size_t bins = 20;
  double low = -1.0;
  double high = 1.0;
};

// Raw scores of every sentence of every profile. `gold` optionally gives one
// answer list per profile; a sentence is gold-bearing when its normalized
// text contains a normalized answer. Scores equal to `high` fall in the last bin.
SimilarityStats similarity_stats(std::span<const correlation::CorrelationProfile> profiles,
                                 const StatsOptions& options = {},
                                 std::span<const std::vector<std::string>> gold = {});
std::string histogram_csv(const SimilarityStats& stats);
nlohmann::json to_json(const SimilarityStats& stats);

inline constexpr const char* kMetricNote =
    "exact_relaxed answer matching stands in for the learned BEM scorer";

struct EvalReport {
  pipeline::Mode mode = pipeline::Mode::ccvqa;
  std::string label;
  std::size_t n = 0;
  double accuracy = 0.0;
  double helpful_ratio = 0.0;
  double harmful_ratio = 0.0;
  double base_accuracy = 0.0;
  std::size_t failures = 0;
  bool interrupted = false;
  ScoreRule rule = ScoreRule::exact_relaxed;
  nlohmann::json config;
};

nlohmann::json to_json(const EvalReport& r);

struct ExperimentOptions {
  std::size_t workers = 1;
  ScoreRule rule = ScoreRule::exact_relaxed;
  bool numeric_tolerance = false;
  const std::atomic<bool>* stop = nullptr;  // when set, unstarted queries are skipped
};

struct RunRecords {
  std::vector<EvalRecord> records;  // query order, completed queries only
  std::vector<std::optional<pipeline::QueryOutcome>> outcomes;
  bool interrupted = false;
};

// Runs one configuration over all queries. Per-query errors are recorded as
// failed, incorrect records.
RunRecords run_queries(std::span<const corpus::Query> queries, const pipeline::World& world,
                       const pipeline::PipelineConfig& cfg, const ExperimentOptions& options);

EvalReport summarize(std::span<const EvalRecord> records, std::span<const EvalRecord> base_records,
                     const pipeline::PipelineConfig& cfg, const ExperimentOptions& options, nlohmann::json config);

struct Experiment {
  EvalReport report;
  RunRecords run;
  RunRecords base;
};

// Runs the mode, plus the base mode for the helpful/harmful pairing.
Experiment run_experiment(std::span<const corpus::Query> queries, const pipeline::World& world,
                          const pipeline::PipelineConfig& cfg, const ExperimentOptions& options,
                          nlohmann::json config_echo);

struct GridPoint {
  std::string grid;   // alpha | tau | components
  std::string label;  // e.g. alpha=0.5
  pipeline::PipelineConfig cfg;
};

std::vector<double> alpha_values();  // 0.1 0.3 0.5 0.7 0.9 1.0
std::vector<double> tau_values();    // 0.25 0.5 0.75
std::vector<GridPoint> alpha_grid(const pipeline::PipelineConfig& base);
std::vector<GridPoint> tau_grid(const pipeline::PipelineConfig& base);
// none, VCCR, VCCR+CAD, VCCR+CAD+CPE
std::vector<GridPoint> component_grid(const pipeline::PipelineConfig& base);

struct AblationResult {
  std::vector<GridPoint> points;
  std::vector<EvalReport> reports;
};

// `echo` turns a grid point's configuration into the config snapshot stored in its report.
AblationResult run_ablation(std::span<const corpus::Query> queries, const pipeline::World& world,
                            std::span<const GridPoint> points, const ExperimentOptions& options,
                            const std::function<nlohmann::json(const pipeline::PipelineConfig&)>& echo);

// grid,label,accuracy,helpful_ratio,harmful_ratio,failures
std::string ablation_table_csv(const AblationResult& result);
nlohmann::json ablation_table_json(const AblationResult& result);

}  // namespace ccvqa::eval
