#include "slim/runner.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

#include "slim/report.hpp"
#include "slim/run_log.hpp"
#include "slim/synthetic.hpp"

namespace slim {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / path).string();
}

StageConfig parse_stage(const json& j, const StageConfig& defaults) {
  StageConfig cfg = defaults;
  cfg.tau = j.value("tau", cfg.tau);
  cfg.k = j.value("k", cfg.k);
  cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
  cfg.probe_size = j.value("probe_size", cfg.probe_size);
  cfg.acceptance_size = j.value("acceptance_size", cfg.acceptance_size);
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw config_error(std::string("malformed run config: ") + ex.what());
  }

  RunConfig cfg;
  cfg.snapshot = doc;
  try {
    cfg.workflow_path = resolve(doc.at("workflow").get<std::string>(), base_dir);
    cfg.dataset_path = resolve(doc.at("dataset").get<std::string>(), base_dir);
    cfg.pricing_path = resolve(doc.at("pricing").get<std::string>(), base_dir);

    if (!doc.contains("seed")) throw config_error("run config must set a seed");
    cfg.seed = doc.at("seed").get<uint64_t>();
    cfg.seed_set = true;

    const json& evaluator = doc.at("evaluator");
    cfg.evaluator_type = evaluator.at("type").get<std::string>();
    if (cfg.evaluator_type == "synthetic") {
      cfg.synthetic_spec_path = resolve(evaluator.at("spec").get<std::string>(), base_dir);
    } else if (cfg.evaluator_type == "http") {
      cfg.http.base_url = evaluator.value("base_url", "");
      cfg.http.completions_path = evaluator.value("path", cfg.http.completions_path);
      cfg.http.max_attempts = evaluator.value("max_attempts", cfg.http.max_attempts);
      cfg.http.backoff_ms = evaluator.value("backoff_ms", cfg.http.backoff_ms);
      if (evaluator.contains("grader")) {
        cfg.http.grader.type = evaluator["grader"].value("type", "exact");
        cfg.http.grader.tolerance = evaluator["grader"].value("tolerance", 1e-6);
      }
      if (evaluator.contains("prompts")) {
        cfg.http.prompts =
            evaluator["prompts"].get<std::map<std::string, std::string>>();
      }
    } else {
      throw config_error("unknown evaluator type '" + cfg.evaluator_type + "'");
    }

    if (doc.contains("stages")) {
      cfg.enable_prune = doc["stages"].value("prune", true);
      cfg.enable_quantize = doc["stages"].value("quantize", true);
      cfg.enable_tune = doc["stages"].value("tune", false);
    }
    const std::string order = doc.value("order", "prune-first");
    if (order == "prune-first") {
      cfg.order = StageOrder::prune_first;
    } else if (order == "quantize-first") {
      cfg.order = StageOrder::quantize_first;
    } else {
      throw config_error("order must be 'prune-first' or 'quantize-first'");
    }

    StageConfig stage_defaults;
    stage_defaults.seed = cfg.seed;
    cfg.prune = doc.contains("prune") ? parse_stage(doc["prune"], stage_defaults) : stage_defaults;
    cfg.quantize =
        doc.contains("quantize") ? parse_stage(doc["quantize"], stage_defaults) : stage_defaults;

    cfg.tuner.seed = cfg.seed + 1;
    if (doc.contains("tuner")) {
      const json& t = doc["tuner"];
      cfg.tuner.lambda = t.value("lambda", cfg.tuner.lambda);
      cfg.tuner.alpha = t.value("alpha", cfg.tuner.alpha);
      cfg.tuner.k = t.value("k", cfg.tuner.k);
      cfg.tuner.patience = t.value("patience", cfg.tuner.patience);
      cfg.tuner.max_rounds = t.value("max_rounds", cfg.tuner.max_rounds);
      cfg.tuner.repeats = t.value("repeats", cfg.tuner.repeats);
      cfg.tuner.acceptance_size = t.value("acceptance_size", cfg.tuner.acceptance_size);
      if (t.contains("seed")) cfg.tuner.seed = t.at("seed").get<uint64_t>();
      if (t.contains("prompt_variants"))
        cfg.tuner.prompt_variants = t["prompt_variants"].get<std::vector<std::string>>();
    }

    if (doc.contains("surrogates")) {
      if (doc["surrogates"].is_string()) {
        std::ifstream in(resolve(doc["surrogates"].get<std::string>(), base_dir));
        if (!in) throw config_error("cannot open surrogate map file");
        json sj = json::parse(in);
        cfg.surrogates = sj.get<SurrogateMap>();
      } else {
        cfg.surrogates = doc["surrogates"].get<SurrogateMap>();
      }
    }

    if (doc.contains("budget") && !doc["budget"].is_null()) {
      const json& b = doc["budget"];
      cfg.budget = b.is_string() ? std::stod(b.get<std::string>()) : b.get<double>();
    }
    cfg.budget_strict = doc.value("budget_strict", false);
    cfg.out_dir = resolve(doc.value("out", "out"), base_dir);
  } catch (const config_error&) {
    throw;
  } catch (const std::exception& ex) {
    throw config_error(std::string("invalid run config: ") + ex.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open run config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), fs::path(path).parent_path().string());
}

int execute_run(const RunConfig& config, std::ostream& err) {
  WorkflowGraph base;
  Dataset dataset;
  PricingTable pricing;
  std::unique_ptr<Evaluator> evaluator;

  // Preflight: every input must load and cross-check before any evaluation.
  try {
    if (!config.seed_set) throw config_error("run config must set a seed");
    std::ifstream in(config.workflow_path);
    if (!in) throw config_error("cannot open workflow '" + config.workflow_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    base = deserialize(buf.str());
    dataset = load_dataset(config.dataset_path);
    pricing = load_pricing(config.pricing_path);
    ensure_priced(base, pricing);
    validate_surrogates(config.surrogates, pricing);
    if (config.evaluator_type == "synthetic") {
      evaluator = std::make_unique<SyntheticEvaluator>(
          load_synthetic_spec(config.synthetic_spec_path));
    } else {
      evaluator = std::make_unique<HttpEvaluator>(config.http);
    }
  } catch (const std::exception& ex) {
    err << "config error: " << ex.what() << '\n';
    return exit_code::config;
  }

  fs::create_directories(config.out_dir);
  RunLogWriter log((fs::path(config.out_dir) / "runlog.jsonl").string());
  log.write_header(config.snapshot, kToolVersion, graph_digest(base), now_iso8601());

  PipelineOptions options;
  options.prune = config.prune;
  options.quantize = config.quantize;
  options.surrogates = config.surrogates;
  options.enable_prune = config.enable_prune;
  options.enable_quantize = config.enable_quantize;
  options.enable_tune = config.enable_tune;
  options.order = config.order;
  options.budget = config.budget;

  PipelineResult result;
  try {
    result = run_pipeline(base, options, &config.tuner, dataset, *evaluator, pricing);
  } catch (const std::exception& ex) {
    err << "evaluator failure: " << ex.what() << '\n';
    log.flush();
    return exit_code::evaluator;
  }

  for (const auto& rec : result.records) log.write_step(rec);
  log.write_summary(graph_digest(result.best), result.best_outcome.avg_score,
                    result.best_outcome.avg_cost_usd, result.counts_per_stage,
                    result.budget_violated);

  {
    std::ofstream out(fs::path(config.out_dir) / "best_workflow.json");
    out << serialize(result.best);
  }
  {
    std::ofstream pool_out(fs::path(config.out_dir) / "pool.tsv");
    pool_out << "score\tcost\tdigest\n";
    std::vector<ScorePoint> points;
    for (const auto& digest : result.pool.insertion_order) {
      const EvalOutcome& out = result.pool.entries.at(digest).outcome;
      pool_out << out.avg_score << '\t' << out.avg_cost_usd << '\t' << digest << '\n';
      points.push_back({out.avg_score, out.avg_cost_usd, digest});
    }
    std::ofstream front_out(fs::path(config.out_dir) / "pareto.tsv");
    for (const auto& p : pareto_frontier(points)) {
      front_out << p.score << '\t' << p.cost << '\n';
    }
  }

  if (result.budget_violated) {
    err << "warning: no pool member satisfies the cost budget; "
        << "returning the minimum-cost workflow\n";
    if (config.budget_strict) return exit_code::budget;
  }
  return exit_code::ok;
}

}  // namespace slim
