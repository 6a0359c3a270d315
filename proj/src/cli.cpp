#include "ccvqa/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "ccvqa/config.hpp"
#include "ccvqa/errors.hpp"
#include "ccvqa/util.hpp"

namespace ccvqa::app {

std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::string kb;
  std::string queries;
  std::string out;
  std::string mode;
  double tau = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  bool oracle = false;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool stub = false;
  std::string dump_trace;
  std::string gt;
  std::string bundle;
  std::string lm_kind;
  std::size_t max_tokens = 0;
  bool no_vccr = false;
  bool no_cpe = false;
  bool no_cad = false;
  std::string grid = "all";
  bool verbose = false;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

RunConfig resolve(const CLI::App& app, const Flags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--kb")) cfg.kb = f.kb;
  if (given("--queries")) cfg.queries = f.queries;
  if (given("--out")) cfg.out = f.out;
  if (given("--mode")) cfg.pipeline.mode = pipeline::mode_from_string(f.mode);
  if (given("--tau")) cfg.pipeline.tau = f.tau;
  if (given("--alpha")) cfg.pipeline.cpe_alpha = f.alpha;
  if (given("--delta")) cfg.pipeline.delta = f.delta;
  if (given("--oracle")) cfg.pipeline.oracle = f.oracle;
  if (given("--seed")) cfg.pipeline.seed = f.seed;
  if (given("--workers")) cfg.workers = f.workers;
  if (given("--stub")) cfg.stub = f.stub;
  if (given("--gt")) cfg.ground_truth = f.gt;
  if (given("--bundle")) cfg.stub_bundle = f.bundle;
  if (given("--lm")) cfg.lm.kind = f.lm_kind;
  if (given("--max-tokens")) cfg.pipeline.max_tokens = f.max_tokens;
  if (f.no_vccr) cfg.pipeline.components.vccr = false;
  if (f.no_cpe) cfg.pipeline.components.cpe = false;
  if (f.no_cad) cfg.pipeline.components.cad = false;
  cfg.validate();
  return cfg;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("no ") + what + " given");
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void check_inputs(const RunConfig& cfg, bool needs_kb) {
  require_file(cfg.queries, "query file");
  if (needs_kb) require_file(cfg.kb, "knowledge base");
  if (!cfg.ground_truth.empty()) require_file(cfg.ground_truth, "ground-truth file");
  if (!cfg.stub_bundle.empty()) require_file(cfg.stub_bundle, "stub bundle");
  if (cfg.pipeline.uses_oracle() && cfg.ground_truth.empty()) {
    throw UsageError("oracle runs need --gt");
  }
}

std::vector<corpus::Query> load_nonempty_queries(const RunConfig& cfg) {
  auto queries = corpus::load_queries(cfg.queries);
  if (queries.empty()) throw UsageError("query file is empty: " + cfg.queries);
  return queries;
}

// Writes to the file when a path is given, else to `fallback`.
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
  } else {
    write_file(path, text);
  }
}

std::string out_dir(const RunConfig& cfg) { return cfg.out.empty() ? std::string("results") : cfg.out; }

std::string records_jsonl(const eval::RunRecords& run, bool trace) {
  std::string out;
  for (const auto& rec : run.records) {
    nlohmann::json j = eval::to_json(rec);
    for (const auto& outcome : run.outcomes) {
      if (outcome && outcome->qid == rec.qid) {
        j["detail"] = pipeline::to_json(*outcome, trace);
        break;
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

int cmd_retrieve(const RunConfig& cfg, std::ostream& out) {
  check_inputs(cfg, true);
  const auto queries = load_nonempty_queries(cfg);
  const Runtime rt = build_runtime(cfg);
  const auto world = rt.world();
  std::string lines;
  for (const auto& q : queries) {
    if (interrupt_flag()) break;
    const auto r = pipeline::retrieve_contexts(q, world, cfg.pipeline);
    nlohmann::json ctx = nlohmann::json::array();
    for (const auto& c : r.contexts) ctx.push_back(corpus::to_json(c));
    lines += nlohmann::json{{"qid", q.qid}, {"contexts", ctx}, {"oracle_inserted", r.oracle_inserted},
                            {"truncated", r.truncated}}
                 .dump() +
             "\n";
  }
  emit(cfg.out, lines, out);
  return 0;
}

int cmd_answer(const RunConfig& cfg, const std::string& dump_trace, std::ostream& out) {
  check_inputs(cfg, cfg.pipeline.uses_retrieval());
  const auto queries = load_nonempty_queries(cfg);
  const Runtime rt = build_runtime(cfg);
  eval::ExperimentOptions options;
  options.workers = cfg.workers;
  options.rule = cfg.rule;
  options.numeric_tolerance = cfg.numeric_tolerance;
  options.stop = &interrupt_flag();
  const auto run = eval::run_queries(queries, rt.world(), cfg.pipeline, options);
  std::string answers;
  std::string trace;
  for (const auto& rec : run.records) {
    nlohmann::json j = {{"qid", rec.qid}, {"answer", rec.prediction}, {"failed", rec.failed}};
    if (rec.failed) j["error"] = rec.error;
    for (const auto& outcome : run.outcomes) {
      if (!outcome || outcome->qid != rec.qid) continue;
      j["detail"] = pipeline::to_json(*outcome, false);
      for (const auto& step : outcome->decode.trace) {
        nlohmann::json s = decoding::to_json(step);
        s["qid"] = rec.qid;
        trace += s.dump() + "\n";
      }
    }
    answers += j.dump() + "\n";
  }
  emit(cfg.out, answers, out);
  if (!dump_trace.empty()) write_file(dump_trace, trace);
  return 0;
}

eval::ExperimentOptions options_for(const RunConfig& cfg) {
  eval::ExperimentOptions options;
  options.workers = cfg.workers;
  options.rule = cfg.rule;
  options.numeric_tolerance = cfg.numeric_tolerance;
  options.stop = &interrupt_flag();
  return options;
}

int cmd_eval(const RunConfig& cfg, const std::string& dump_trace, std::ostream& out) {
  check_inputs(cfg, cfg.pipeline.uses_retrieval());
  const auto queries = load_nonempty_queries(cfg);
  const Runtime rt = build_runtime(cfg);
  const auto ex = eval::run_experiment(queries, rt.world(), cfg.pipeline, options_for(cfg), cfg.to_json());
  const std::string dir = out_dir(cfg);
  write_file(dir + "/report.json", eval::to_json(ex.report).dump(2) + "\n");
  write_file(dir + "/records.jsonl", records_jsonl(ex.run, !dump_trace.empty()));
  if (!dump_trace.empty()) {
    std::string trace;
    for (const auto& outcome : ex.run.outcomes) {
      if (!outcome) continue;
      for (const auto& step : outcome->decode.trace) {
        nlohmann::json s = decoding::to_json(step);
        s["qid"] = outcome->qid;
        trace += s.dump() + "\n";
      }
    }
    write_file(dump_trace, trace);
  }
  out << fmt::format("{} n={} accuracy={} helpful={} harmful={} failures={}\n", pipeline::to_string(ex.report.mode),
                     ex.report.n, ex.report.accuracy, ex.report.helpful_ratio, ex.report.harmful_ratio,
                     ex.report.failures);
  return ex.report.interrupted ? 130 : 0;
}

std::string file_label(const eval::GridPoint& p) {
  std::string s = p.grid + "_" + p.label;
  for (auto& c : s) {
    if (c == '=' || c == '+') c = '_';
  }
  return s;
}

int cmd_ablate(const RunConfig& cfg, const std::string& grid, std::ostream& out) {
  check_inputs(cfg, true);
  const auto queries = load_nonempty_queries(cfg);
  const Runtime rt = build_runtime(cfg);
  std::vector<eval::GridPoint> points;
  auto append = [&](std::vector<eval::GridPoint> g) { points.insert(points.end(), g.begin(), g.end()); };
  if (grid == "alpha" || grid == "all") append(eval::alpha_grid(cfg.pipeline));
  if (grid == "tau" || grid == "all") append(eval::tau_grid(cfg.pipeline));
  if (grid == "components" || grid == "all") append(eval::component_grid(cfg.pipeline));
  if (points.empty()) throw UsageError("unknown grid '" + grid + "' (alpha, tau, components, all)");
  auto echo = [&](const pipeline::PipelineConfig& p) {
    RunConfig c = cfg;
    c.pipeline = p;
    return c.to_json();
  };
  const auto result = eval::run_ablation(queries, rt.world(), points, options_for(cfg), echo);
  const std::string dir = out_dir(cfg);
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    write_file(dir + "/reports/" + file_label(result.points[i]) + ".json",
               eval::to_json(result.reports[i]).dump(2) + "\n");
  }
  write_file(dir + "/ablation.csv", eval::ablation_table_csv(result));
  write_file(dir + "/ablation.json", eval::ablation_table_json(result).dump(2) + "\n");
  out << eval::ablation_table_csv(result);
  return result.reports.size() == points.size() ? 0 : 130;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  check_inputs(cfg, true);
  const auto queries = load_nonempty_queries(cfg);
  const Runtime rt = build_runtime(cfg);
  const auto world = rt.world();
  std::vector<correlation::CorrelationProfile> profiles;
  std::vector<std::vector<std::string>> gold;
  for (const auto& q : queries) {
    if (interrupt_flag()) break;
    const auto retrieval = pipeline::retrieve_contexts(q, world, cfg.pipeline);
    std::vector<ContextDoc> contexts = vccr::retrieved_only(retrieval.contexts);
    std::string q_star = q.question;
    const auto comp = cfg.pipeline.effective_components();
    if (comp.vccr && world.vlm) {
      contexts = vccr::merge_contexts(vccr::generate_parametric_context(q, *world.vlm), retrieval.contexts);
    }
    if (world.vlm && (comp.cpe || comp.cad)) q_star = vccr::rewrite_question(q, *world.vlm).question;
    profiles.push_back(correlation::build_profile(contexts, q_star, q.image_ref, *world.embedder, cfg.pipeline.tau));
    gold.push_back(q.answers);
  }
  eval::StatsOptions options;
  options.bins = cfg.histogram_bins;
  const auto stats = eval::similarity_stats(profiles, options, gold);
  const std::string dir = out_dir(cfg);
  write_file(dir + "/histogram.csv", eval::histogram_csv(stats));
  nlohmann::json j = eval::to_json(stats);
  j["config"] = cfg.to_json();
  write_file(dir + "/stats.json", j.dump(2) + "\n");
  out << fmt::format("sentences={} mean={} stddev={} sentences_per_context={}\n", stats.sentences, stats.mean,
                     stats.stddev, stats.sentences_per_context);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ccvqa: conflict-aware retrieval-augmented answering"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration");
  app.add_option("--kb", f.kb, "knowledge base JSONL");
  app.add_option("--queries", f.queries, "query JSONL");
  app.add_option("--out", f.out, "output file (retrieve, answer) or directory (eval, ablate, stats)");
  app.add_option("--mode", f.mode, "base | rag | ccvqa | oracle");
  app.add_option("--tau", f.tau, "fraction of sentences compressed");
  app.add_option("--alpha", f.alpha, "position increment for compressed sentences");
  app.add_option("--delta", f.delta, "conflict score bias");
  app.add_flag("--oracle", f.oracle, "insert the ground-truth section into the top sections");
  app.add_option("--seed", f.seed, "sampling and request seed");
  app.add_option("--workers", f.workers, "concurrent queries");
  app.add_flag("--stub", f.stub, "use scripted clients");
  app.add_option("--dump-trace", f.dump_trace, "write per-step decoding signals as JSONL");
  app.add_option("--gt", f.gt, "ground-truth section annotations JSONL");
  app.add_option("--bundle", f.bundle, "stub bundle JSON (scripted VLM, pinned embeddings, scenario LM)");
  app.add_option("--lm", f.lm_kind, "toy | scenario");
  app.add_option("--max-tokens", f.max_tokens, "answer length limit");
  app.add_flag("--no-vccr", f.no_vccr, "disable conflict reasoning");
  app.add_flag("--no-cpe", f.no_cpe, "disable position compression");
  app.add_flag("--no-cad", f.no_cad, "disable adaptive decoding");
  app.add_flag("-v,--verbose", f.verbose, "debug logging");

  auto* retrieve = app.add_subcommand("retrieve", "write the top sections per query as JSONL");
  auto* answer = app.add_subcommand("answer", "answer every query, JSONL output");
  auto* evaluate = app.add_subcommand("eval", "score one mode and write a report");
  auto* ablate = app.add_subcommand("ablate", "alpha, tau and component sweeps");
  ablate->add_option("--grid", f.grid, "alpha | tau | components | all");
  auto* stats = app.add_subcommand("stats", "sentence similarity statistics");
  for (auto* sub : {retrieve, answer, evaluate, ablate, stats}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(f.verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    const RunConfig cfg = resolve(app, f);
    if (*retrieve) return cmd_retrieve(cfg, out);
    if (*answer) return cmd_answer(cfg, f.dump_trace, out);
    if (*evaluate) return cmd_eval(cfg, f.dump_trace, out);
    if (*ablate) return cmd_ablate(cfg, f.grid, out);
    if (*stats) return cmd_stats(cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ccvqa::app
