#pragma once

#include <map>
#include <string>

#include "slim/eval.hpp"
#include "slim/graph.hpp"

namespace slim {

struct GraderConfig {
  std::string type = "exact";  // exact | numeric
  double tolerance = 1e-6;     // numeric match only
};

/// Scores a final node output against the instance target in [0, 1].
double grade(const GraderConfig& grader, const std::string& output, const std::string& target);

struct HttpEvalConfig {
  std::string base_url;                      // empty -> SLIM_API_BASE
  std::string api_key_env = "SLIM_API_KEY";  // credential source
  std::string completions_path = "/v1/chat/completions";
  GraderConfig grader;
  int max_attempts = 3;
  int backoff_ms = 100;
  int timeout_sec = 30;
  std::map<std::string, std::string> prompts;  // prompt_ref -> template text
};

/// Chat-completions adapter: executes nodes in topological order, feeding
/// each node its rendered prompt plus upstream outputs, with temperature
/// pinned to 0 and true token usage taken from the endpoint response.
class HttpEvaluator : public Evaluator {
 public:
  explicit HttpEvaluator(HttpEvalConfig config);

  InstanceEval run(const WorkflowGraph& graph, const DatasetInstance& instance) const override;
  int max_parallelism() const override { return 4; }

 private:
  HttpEvalConfig config_;
  std::string api_key_;
};

}  // namespace slim
