#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "slim/compressor.hpp"
#include "slim/http_eval.hpp"
#include "slim/tuner.hpp"

namespace slim {

inline constexpr const char* kToolVersion = "0.1.0";

class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  std::string workflow_path;
  std::string dataset_path;
  std::string pricing_path;

  std::string evaluator_type = "synthetic";  // synthetic | http
  std::string synthetic_spec_path;
  HttpEvalConfig http;

  bool enable_prune = true;
  bool enable_quantize = true;
  bool enable_tune = false;
  StageOrder order = StageOrder::prune_first;

  StageConfig prune;
  StageConfig quantize;
  TunerConfig tuner;
  SurrogateMap surrogates;

  std::optional<double> budget;
  bool budget_strict = false;

  uint64_t seed = 0;
  bool seed_set = false;  // the seed is mandatory
  std::string out_dir = "out";

  nlohmann::json snapshot;  // config as loaded, embedded in the run log header
};

/// Parses a run configuration document. Relative paths resolve against
/// base_dir. Throws config_error on any malformed or missing field.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 2;
inline constexpr int evaluator = 3;
inline constexpr int budget = 4;
}  // namespace exit_code

/// Loads inputs, runs the pipeline and writes runlog.jsonl,
/// best_workflow.json, pool.tsv and pareto.tsv into the output directory.
/// Returns a process exit code; diagnostics go to `err`.
int execute_run(const RunConfig& config, std::ostream& err);

}  // namespace slim
