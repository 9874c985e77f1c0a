#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slim/eval.hpp"
#include "slim/graph.hpp"
#include "slim/importance.hpp"

namespace slim {

struct StageConfig {
  double tau = 0.95;        // acceptance threshold, in (0, 1)
  int k = 3;                // top-k candidates trialled per iteration
  int max_iterations = -1;  // accepted-operation budget; -1 = |V| of the stage input
  FusionConfig fusion;
  int probe_size = 50;
  int acceptance_size = -1;  // -1 = same slice as the probe
  uint64_t seed = 0;
};

/// High-cost model -> low-cost surrogate. No chains: a surrogate model may
/// not itself have a surrogate.
using SurrogateMap = std::map<ModelId, ModelId>;

void validate_surrogates(const SurrogateMap& surrogates, const PricingTable& pricing);

struct StepRecord {
  std::string stage;  // prune | quantize | tune
  int iteration = 0;
  NodeId candidate;
  std::string action;
  SignalSet signals;
  std::map<std::string, int> ranks;  // deg, bet, shap, dcost
  double fused = 0.0;
  double score_before = 0.0;
  double cost_before = 0.0;
  double score_after = 0.0;
  double cost_after = 0.0;
  double threshold = 0.0;
  std::string verdict;  // accepted | rejected | rolled_back
  std::string before_digest;
  std::string after_digest;
};

struct PoolEntry {
  WorkflowGraph graph;
  EvalOutcome outcome;
};

/// Every workflow evaluated on the acceptance slice across all stages,
/// keyed by canonical digest. Always contains the original baseline.
struct CandidatePool {
  std::map<std::string, PoolEntry> entries;
  std::vector<std::string> insertion_order;

  /// Returns false when the digest was already present.
  bool insert(const std::string& digest, WorkflowGraph graph, EvalOutcome outcome);
};

struct EvalCounts {
  int probe_evals = 0;       // evaluate() calls on the probe slice
  int acceptance_evals = 0;  // evaluate() calls on the acceptance slice
};

struct StageResult {
  WorkflowGraph graph;
  std::vector<StepRecord> records;
  EvalOutcome outcome;  // acceptance-slice outcome of the returned graph
  EvalCounts counts;
};

/// One greedy compression stage: rank all eligible candidates, trial the
/// top-k in fused order, accept the first that keeps the acceptance score at
/// or above tau times the stage baseline, recompute signals and repeat.
/// An iteration with no accepted candidate rolls back and ends the stage.
StageResult run_stage(const WorkflowGraph& base, LooMode mode, const StageConfig& cfg,
                      const SurrogateMap& surrogates, const Dataset& dataset,
                      const Evaluator& evaluator, const PricingTable& pricing,
                      CandidatePool& pool);

StageResult prune_stage(const WorkflowGraph& base, const StageConfig& cfg,
                        const Dataset& dataset, const Evaluator& evaluator,
                        const PricingTable& pricing, CandidatePool& pool);

StageResult quant_stage(const WorkflowGraph& pruned, const StageConfig& cfg,
                        const SurrogateMap& surrogates, const Dataset& dataset,
                        const Evaluator& evaluator, const PricingTable& pricing,
                        CandidatePool& pool);

enum class StageOrder { prune_first, quantize_first };

struct TunerConfig;  // tuner.hpp

struct PipelineOptions {
  StageConfig prune;
  StageConfig quantize;
  SurrogateMap surrogates;
  bool enable_prune = true;
  bool enable_quantize = true;
  bool enable_tune = false;
  StageOrder order = StageOrder::prune_first;
  std::optional<double> budget;  // cost budget B, USD per problem
};

struct PipelineResult {
  WorkflowGraph best;
  EvalOutcome best_outcome;
  std::vector<StepRecord> records;
  CandidatePool pool;
  std::map<std::string, EvalCounts> counts_per_stage;
  bool budget_violated = false;
};

/// Full prune -> quantize (-> tune) pipeline. Returns the lexicographic
/// argmax (score descending, cost ascending) over the candidate pool,
/// restricted to members within the budget when one is given; if no member
/// fits the budget, the minimum-cost member is returned with a warning flag.
PipelineResult run_pipeline(const WorkflowGraph& base, const PipelineOptions& options,
                            const TunerConfig* tune_cfg, const Dataset& dataset,
                            const Evaluator& evaluator, const PricingTable& pricing);

}  // namespace slim
