#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slim/compressor.hpp"
#include "slim/eval.hpp"
#include "slim/graph.hpp"

namespace slim {

struct TunerConfig {
  double lambda = 0.3;  // exploration mix in [0, 1]
  double alpha = 0.2;   // score sharpness >= 0
  int k = 3;            // top-k tracked for early stopping
  int patience = 5;     // rounds of unchanged top-k before stop
  int max_rounds = 50;
  int repeats = 1;  // evaluations averaged per candidate
  uint64_t seed = 0;
  int acceptance_size = -1;  // -1 = same slice as the compression stages
  std::vector<std::string> prompt_variants;  // cycle order for swap-prompt-variant
};

/// Draws one index with probability
/// P(i) = lambda / n + (1 - lambda) * softmax_i(alpha * (s_i - s_max)).
size_t mixed_select(const std::vector<double>& scores, double lambda, double alpha,
                    std::mt19937_64& rng);

/// The analytic distribution behind mixed_select, exposed for tests.
std::vector<double> mixed_probabilities(const std::vector<double>& scores, double lambda,
                                        double alpha);

/// A pure, validity-preserving local edit. apply() returns nullopt when the
/// graph offers no legal application site.
struct MutationOp {
  std::string name;
  std::function<bool(const WorkflowGraph&)> applicable;
  std::function<std::optional<WorkflowGraph>(const WorkflowGraph&, std::mt19937_64&)> apply;
};

/// Built-in edits: swap-prompt-variant, rewire-edge, toggle-model-tier,
/// duplicate-then-ensemble.
std::vector<MutationOp> builtin_mutations(const std::vector<std::string>& prompt_variants,
                                          const SurrogateMap& surrogates);

struct TuneResult {
  WorkflowGraph graph;
  EvalOutcome outcome;
  std::vector<StepRecord> records;
  EvalCounts counts;
  int rounds = 0;
};

/// Offline search over localized edits: soft mixed-probability parent
/// selection from the candidate pool, uniform mutation choice, top-k
/// stability early stopping. The result replaces `start` only on a strict
/// score improvement.
TuneResult tune(const WorkflowGraph& start, const TunerConfig& cfg,
                const std::vector<MutationOp>& mutations, const Dataset& dataset,
                const Evaluator& evaluator, const PricingTable& pricing,
                CandidatePool& pool, const std::vector<DatasetInstance>& slice);

}  // namespace slim
