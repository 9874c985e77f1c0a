#pragma once

#include <map>
#include <string>
#include <vector>

#include "slim/eval.hpp"
#include "slim/graph.hpp"

namespace slim {

struct SignalSet {
  NodeId node;
  int s_deg = 0;          // in-degree + out-degree
  double s_bet = 0.0;     // directed betweenness, unit edge lengths
  double delta_score = 0.0;  // score drop when pruned / substituted
  double delta_cost = 0.0;   // USD per problem saved
};

struct FusionConfig {
  double w_deg = 1.0;
  double w_bet = 1.0;
  double w_shap = 2.0;
  double w_dcost = 1.0;
};

/// Per-metric prune-priority ranks (1 = most prunable, dense ranking) and
/// their weighted reciprocal-rank fusion.
struct RankTable {
  std::map<NodeId, int> rank_deg;
  std::map<NodeId, int> rank_bet;
  std::map<NodeId, int> rank_shap;
  std::map<NodeId, int> rank_dcost;
  std::map<NodeId, double> fused;
  std::vector<NodeId> candidate_order;  // fused descending, ties by NodeId
  int kappa = 10;
};

int degree_signal(const WorkflowGraph& g, const NodeId& v);

/// Betweenness over ordered node pairs of the directed graph:
/// sum over (s, t), s != v != t, of sigma_st(v) / sigma_st with unit edge
/// lengths; pairs with no path contribute 0.
std::map<NodeId, double> betweenness_all(const WorkflowGraph& g);
double betweenness_signal(const WorkflowGraph& g, const NodeId& v);

enum class LooMode { prune, quantize };

/// The variant graph a candidate's LOO signals are measured against:
/// prune -> remove_node_with_patch, quantize -> substitute_model.
WorkflowGraph loo_variant(const WorkflowGraph& g, const NodeId& v, LooMode mode,
                          const std::map<ModelId, ModelId>& surrogates);

/// Delta score and delta cost for one candidate, against a baseline outcome
/// computed once per ranking round on the same slice.
SignalSet loo_signals(const WorkflowGraph& g, const NodeId& v, LooMode mode,
                      const std::map<ModelId, ModelId>& surrogates,
                      const std::vector<DatasetInstance>& slice,
                      const Evaluator& evaluator, const PricingTable& pricing,
                      const EvalOutcome& baseline,
                      const std::map<NodeId, double>& betweenness);

/// Ranks each signal in prune-priority orientation (ascending degree,
/// betweenness and delta score; descending delta cost) and fuses with
/// RRF(v) = sum_m w_m / (kappa + r_m(v)), kappa = max(10, |V|).
RankTable rank_and_fuse(const std::vector<SignalSet>& signals, const FusionConfig& config,
                        size_t graph_node_count);

}  // namespace slim
