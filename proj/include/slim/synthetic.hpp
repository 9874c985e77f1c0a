#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "slim/eval.hpp"
#include "slim/graph.hpp"

namespace slim {

struct TokenProfile {
  int64_t input_tokens = 0;
  int64_t output_tokens = 0;
};

/// Desk-scale stand-in for a real model backend. Scores are an additive
/// function of which nodes survive in the graph, with optional saturating
/// redundancy groups and per-node penalties when a node is bound to a
/// low-tier model.
struct SyntheticTaskSpec {
  std::map<NodeId, double> contributions;      // score units, >= 0
  std::map<NodeId, TokenProfile> tokens;       // per call, per instance
  std::vector<std::vector<NodeId>> redundancy_groups;  // disjoint; max member counts
  std::map<NodeId, double> quant_penalty;      // score lost on the low tier
  std::set<ModelId> low_tier_models;
  double noise_amplitude = 0.0;
  uint64_t seed = 0;
};

SyntheticTaskSpec load_synthetic_spec(const std::string& path);
SyntheticTaskSpec parse_synthetic_spec(const std::string& text);

class SyntheticEvaluator : public Evaluator {
 public:
  explicit SyntheticEvaluator(SyntheticTaskSpec spec);

  InstanceEval run(const WorkflowGraph& graph, const DatasetInstance& instance) const override;
  int max_parallelism() const override { return 8; }

  const SyntheticTaskSpec& spec() const { return spec_; }

 private:
  SyntheticTaskSpec spec_;
};

}  // namespace slim
