#include "slim/compressor.hpp"

#include <algorithm>
#include <cmath>

#include "slim/tuner.hpp"

namespace slim {

namespace {

constexpr double kScoreEps = 1e-12;

void check_stage_config(const StageConfig& cfg) {
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0))
    throw eval_error("stage tau must be in (0, 1)");
  if (cfg.k < 1) throw eval_error("stage k must be >= 1");
  if (cfg.max_iterations < -1) throw eval_error("stage max_iterations must be >= 0 (or -1)");
  if (cfg.probe_size < 1) throw eval_error("probe size must be >= 1");
}

std::vector<NodeId> eligible_candidates(const WorkflowGraph& g, LooMode mode,
                                        const SurrogateMap& surrogates) {
  std::vector<NodeId> out;
  for (const auto& n : g.nodes) {
    if (n.is_protected) continue;
    if (mode == LooMode::quantize && !surrogates.count(n.model)) continue;
    out.push_back(n.id);
  }
  return out;
}

std::string action_text(const WorkflowGraph& g, const NodeId& v, LooMode mode,
                        const SurrogateMap& surrogates) {
  if (mode == LooMode::prune) return "remove";
  const ModelId& from = find_node(g, v)->model;
  return "substitute " + from + " -> " + surrogates.at(from);
}

}  // namespace

void validate_surrogates(const SurrogateMap& surrogates, const PricingTable& pricing) {
  for (const auto& [from, to] : surrogates) {
    if (!pricing.has(from))
      throw eval_error("surrogate map source model '" + from + "' has no pricing entry");
    if (!pricing.has(to))
      throw eval_error("surrogate model '" + to + "' has no pricing entry");
    if (surrogates.count(to))
      throw eval_error("surrogate chain: model '" + to + "' is both a surrogate and a source");
  }
}

bool CandidatePool::insert(const std::string& digest, WorkflowGraph graph, EvalOutcome outcome) {
  auto [it, inserted] = entries.emplace(digest, PoolEntry{std::move(graph), std::move(outcome)});
  if (inserted) insertion_order.push_back(digest);
  return inserted;
}

StageResult run_stage(const WorkflowGraph& base, LooMode mode, const StageConfig& cfg,
                      const SurrogateMap& surrogates, const Dataset& dataset,
                      const Evaluator& evaluator, const PricingTable& pricing,
                      CandidatePool& pool) {
  check_stage_config(cfg);

  ProbeSlice probe = sample_probe(dataset, static_cast<size_t>(cfg.probe_size), cfg.seed);
  std::vector<DatasetInstance> probe_instances = slice_instances(dataset, probe);
  std::vector<DatasetInstance> acceptance_instances =
      cfg.acceptance_size < 0
          ? probe_instances
          : slice_instances(dataset, sample_probe(dataset, static_cast<size_t>(cfg.acceptance_size),
                                                  cfg.seed + 1));

  StageResult result;
  result.graph = base;
  const std::string stage_tag = mode == LooMode::prune ? "prune" : "quantize";

  EvalOutcome baseline = evaluate(base, acceptance_instances, evaluator, pricing);
  result.counts.acceptance_evals++;
  pool.insert(graph_digest(base), base, baseline);
  const double stage_baseline_score = baseline.avg_score;
  const double threshold = cfg.tau * stage_baseline_score;

  EvalOutcome current = baseline;
  const int max_accepted =
      cfg.max_iterations < 0 ? static_cast<int>(base.nodes.size()) : cfg.max_iterations;

  int accepted_ops = 0;
  int iteration = 0;
  while (accepted_ops < max_accepted) {
    std::vector<NodeId> candidates = eligible_candidates(result.graph, mode, surrogates);
    if (candidates.empty()) break;
    iteration++;

    EvalOutcome probe_baseline = evaluate(result.graph, probe_instances, evaluator, pricing);
    result.counts.probe_evals++;
    auto betweenness = betweenness_all(result.graph);

    std::vector<SignalSet> signals;
    signals.reserve(candidates.size());
    for (const auto& v : candidates) {
      signals.push_back(loo_signals(result.graph, v, mode, surrogates, probe_instances,
                                    evaluator, pricing, probe_baseline, betweenness));
      result.counts.probe_evals++;
    }
    RankTable table = rank_and_fuse(signals, cfg.fusion, result.graph.nodes.size());

    const size_t trials = std::min<size_t>(static_cast<size_t>(cfg.k), table.candidate_order.size());
    std::vector<StepRecord> iteration_records;
    bool accepted = false;
    const std::string before_digest = graph_digest(result.graph);

    for (size_t i = 0; i < trials; ++i) {
      const NodeId& v = table.candidate_order[i];
      WorkflowGraph variant = loo_variant(result.graph, v, mode, surrogates);
      EvalOutcome out = evaluate(variant, acceptance_instances, evaluator, pricing);
      result.counts.acceptance_evals++;
      const std::string after_digest = graph_digest(variant);
      pool.insert(after_digest, variant, out);

      StepRecord rec;
      rec.stage = stage_tag;
      rec.iteration = iteration;
      rec.candidate = v;
      rec.action = action_text(result.graph, v, mode, surrogates);
      rec.signals = *std::find_if(signals.begin(), signals.end(),
                                  [&](const SignalSet& s) { return s.node == v; });
      rec.ranks = {{"deg", table.rank_deg.at(v)},
                   {"bet", table.rank_bet.at(v)},
                   {"shap", table.rank_shap.at(v)},
                   {"dcost", table.rank_dcost.at(v)}};
      rec.fused = table.fused.at(v);
      rec.score_before = current.avg_score;
      rec.cost_before = current.avg_cost_usd;
      rec.score_after = out.avg_score;
      rec.cost_after = out.avg_cost_usd;
      rec.threshold = threshold;
      rec.before_digest = before_digest;
      rec.after_digest = after_digest;

      if (out.avg_score + kScoreEps >= threshold) {
        rec.verdict = "accepted";
        iteration_records.push_back(std::move(rec));
        result.graph = std::move(variant);
        current = std::move(out);
        accepted = true;
        accepted_ops++;
        break;
      }
      rec.verdict = "rejected";
      iteration_records.push_back(std::move(rec));
    }

    if (!accepted) {
      // The whole iteration is revoked: no trial graph escapes the stage.
      for (auto& rec : iteration_records) rec.verdict = "rolled_back";
      result.records.insert(result.records.end(), iteration_records.begin(),
                            iteration_records.end());
      break;
    }
    result.records.insert(result.records.end(), iteration_records.begin(),
                          iteration_records.end());
  }

  result.outcome = current;
  return result;
}

StageResult prune_stage(const WorkflowGraph& base, const StageConfig& cfg,
                        const Dataset& dataset, const Evaluator& evaluator,
                        const PricingTable& pricing, CandidatePool& pool) {
  return run_stage(base, LooMode::prune, cfg, {}, dataset, evaluator, pricing, pool);
}

StageResult quant_stage(const WorkflowGraph& pruned, const StageConfig& cfg,
                        const SurrogateMap& surrogates, const Dataset& dataset,
                        const Evaluator& evaluator, const PricingTable& pricing,
                        CandidatePool& pool) {
  return run_stage(pruned, LooMode::quantize, cfg, surrogates, dataset, evaluator, pricing, pool);
}

PipelineResult run_pipeline(const WorkflowGraph& base, const PipelineOptions& options,
                            const TunerConfig* tune_cfg, const Dataset& dataset,
                            const Evaluator& evaluator, const PricingTable& pricing) {
  ValidationReport rep = validate(base);
  if (!rep.ok) {
    std::string msg = "pipeline input graph invalid:";
    for (const auto& v : rep.violations) msg += " [" + v + "]";
    throw graph_error(msg);
  }
  ensure_priced(base, pricing);
  validate_surrogates(options.surrogates, pricing);
  if (options.enable_tune && !tune_cfg)
    throw eval_error("tuner enabled but no tuner configuration given");

  PipelineResult result;

  // Shared acceptance slice for the base evaluation and the tuner.
  const StageConfig& slice_cfg = options.enable_prune ? options.prune : options.quantize;
  ProbeSlice probe =
      sample_probe(dataset, static_cast<size_t>(slice_cfg.probe_size), slice_cfg.seed);
  std::vector<DatasetInstance> acceptance_instances =
      slice_cfg.acceptance_size < 0
          ? slice_instances(dataset, probe)
          : slice_instances(dataset,
                            sample_probe(dataset, static_cast<size_t>(slice_cfg.acceptance_size),
                                         slice_cfg.seed + 1));

  EvalOutcome base_outcome = evaluate(base, acceptance_instances, evaluator, pricing);
  result.counts_per_stage["baseline"].acceptance_evals++;
  result.pool.insert(graph_digest(base), base, base_outcome);

  WorkflowGraph current = base;
  auto run_one = [&](LooMode mode) {
    const StageConfig& cfg = mode == LooMode::prune ? options.prune : options.quantize;
    StageResult stage = run_stage(current, mode, cfg, options.surrogates, dataset, evaluator,
                                  pricing, result.pool);
    current = stage.graph;
    result.records.insert(result.records.end(), stage.records.begin(), stage.records.end());
    result.counts_per_stage[mode == LooMode::prune ? "prune" : "quantize"] = stage.counts;
  };

  if (options.order == StageOrder::prune_first) {
    if (options.enable_prune) run_one(LooMode::prune);
    if (options.enable_quantize) run_one(LooMode::quantize);
  } else {
    if (options.enable_quantize) run_one(LooMode::quantize);
    if (options.enable_prune) run_one(LooMode::prune);
  }

  if (options.enable_tune) {
    std::vector<DatasetInstance> tune_slice =
        tune_cfg->acceptance_size < 0
            ? acceptance_instances
            : slice_instances(dataset,
                              sample_probe(dataset, static_cast<size_t>(tune_cfg->acceptance_size),
                                           tune_cfg->seed));
    auto mutations = builtin_mutations(tune_cfg->prompt_variants, options.surrogates);
    TuneResult tuned = tune(current, *tune_cfg, mutations, dataset, evaluator, pricing,
                            result.pool, tune_slice);
    current = tuned.graph;
    result.records.insert(result.records.end(), tuned.records.begin(), tuned.records.end());
    result.counts_per_stage["tune"] = tuned.counts;
  }

  // Final selection over the pool: score descending, then cost ascending,
  // digest as the deterministic last tie-break.
  auto better = [&](const std::string& a, const std::string& b) {
    const EvalOutcome& oa = result.pool.entries.at(a).outcome;
    const EvalOutcome& ob = result.pool.entries.at(b).outcome;
    if (oa.avg_score != ob.avg_score) return oa.avg_score > ob.avg_score;
    if (oa.avg_cost_usd != ob.avg_cost_usd) return oa.avg_cost_usd < ob.avg_cost_usd;
    return a < b;
  };

  std::string best_digest;
  for (const auto& [digest, entry] : result.pool.entries) {
    if (options.budget && entry.outcome.avg_cost_usd > *options.budget) continue;
    if (best_digest.empty() || better(digest, best_digest)) best_digest = digest;
  }
  if (best_digest.empty()) {
    // Nothing fits the budget: fall back to the minimum-cost member.
    result.budget_violated = true;
    for (const auto& [digest, entry] : result.pool.entries) {
      if (best_digest.empty() ||
          entry.outcome.avg_cost_usd <
              result.pool.entries.at(best_digest).outcome.avg_cost_usd ||
          (entry.outcome.avg_cost_usd ==
               result.pool.entries.at(best_digest).outcome.avg_cost_usd &&
           digest < best_digest)) {
        best_digest = digest;
      }
    }
  }
  result.best = result.pool.entries.at(best_digest).graph;
  result.best_outcome = result.pool.entries.at(best_digest).outcome;
  return result;
}

}  // namespace slim
