#include "slim/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace slim {

namespace {

constexpr double kScoreEps = 1e-12;

void check_tuner_config(const TunerConfig& cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw eval_error("tuner lambda must be in [0, 1]");
  if (cfg.alpha < 0.0) throw eval_error("tuner alpha must be >= 0");
  if (cfg.k < 1) throw eval_error("tuner k must be >= 1");
  if (cfg.patience < 1) throw eval_error("tuner patience must be >= 1");
  if (cfg.repeats < 1) throw eval_error("tuner repeats must be >= 1");
  if (cfg.max_rounds < 0) throw eval_error("tuner max_rounds must be >= 0");
}

}  // namespace

std::vector<double> mixed_probabilities(const std::vector<double>& scores, double lambda,
                                        double alpha) {
  if (scores.empty()) throw eval_error("mixed_select: empty candidate list");
  const double n = static_cast<double>(scores.size());
  const double s_max = *std::max_element(scores.begin(), scores.end());
  double denom = 0.0;
  std::vector<double> probs(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(alpha * (scores[i] - s_max));
    denom += probs[i];
  }
  for (double& p : probs) p = lambda / n + (1.0 - lambda) * (p / denom);
  return probs;
}

size_t mixed_select(const std::vector<double>& scores, double lambda, double alpha,
                    std::mt19937_64& rng) {
  std::vector<double> probs = mixed_probabilities(scores, lambda, alpha);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double u = uniform(rng);
  double cumulative = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return probs.size() - 1;
}

namespace {

bool graph_ok(const WorkflowGraph& g) { return validate(g).ok; }

std::vector<NodeId> prompt_swap_targets(const WorkflowGraph& g,
                                        const std::vector<std::string>& variants) {
  std::vector<NodeId> out;
  for (const auto& n : g.nodes) {
    if (n.is_protected) continue;
    if (std::find(variants.begin(), variants.end(), n.prompt_ref) != variants.end())
      out.push_back(n.id);
  }
  return out;
}

// All single-endpoint edge moves whose result still validates.
std::vector<WorkflowGraph> rewire_moves(const WorkflowGraph& g) {
  std::vector<WorkflowGraph> moves;
  for (size_t ei = 0; ei < g.edges.size(); ++ei) {
    const Edge& edge = g.edges[ei];
    for (const auto& n : g.nodes) {
      for (bool move_target : {false, true}) {
        Edge replacement = move_target ? Edge{edge.source, n.id} : Edge{n.id, edge.target};
        if (replacement == edge) continue;
        WorkflowGraph candidate = g;
        candidate.edges[ei] = replacement;
        candidate = normalize(std::move(candidate));
        if (candidate.edges.size() == g.edges.size() && graph_ok(candidate))
          moves.push_back(std::move(candidate));
      }
    }
  }
  return moves;
}

struct TierToggle {
  NodeId node;
  ModelId to;
};

std::vector<TierToggle> tier_toggles(const WorkflowGraph& g, const SurrogateMap& surrogates) {
  std::map<ModelId, ModelId> inverse;
  for (const auto& [from, to] : surrogates) {
    auto it = inverse.find(to);
    if (it == inverse.end() || from < it->second) inverse[to] = from;
  }
  std::vector<TierToggle> out;
  for (const auto& n : g.nodes) {
    if (n.is_protected) continue;
    if (auto it = surrogates.find(n.model); it != surrogates.end())
      out.push_back({n.id, it->second});
    else if (auto inv = inverse.find(n.model); inv != inverse.end())
      out.push_back({n.id, inv->second});
  }
  return out;
}

bool is_generator_kind(const std::string& kind) {
  return kind == op_kind::answer_generate || kind == op_kind::custom ||
         kind == op_kind::custom_code_generate || kind == op_kind::programmer ||
         kind == op_kind::code_refine;
}

std::vector<WorkflowGraph> ensemble_duplications(const WorkflowGraph& g) {
  std::vector<NodeId> ensembles;
  for (const auto& n : g.nodes) {
    if (n.operator_kind == op_kind::sc_ensemble) ensembles.push_back(n.id);
  }
  std::vector<WorkflowGraph> out;
  if (ensembles.empty()) return out;
  for (const auto& n : g.nodes) {
    if (n.is_protected || !is_generator_kind(n.operator_kind)) continue;
    auto preds = predecessors(g, n.id);
    if (preds.empty()) continue;
    for (const auto& ensemble : ensembles) {
      WorkflowNode clone = n;
      clone.id = n.id + "_copy";
      while (find_node(g, clone.id)) clone.id += "x";
      WorkflowGraph candidate = g;
      candidate.nodes.push_back(clone);
      for (const auto& p : preds) candidate.edges.push_back({p, clone.id});
      candidate.edges.push_back({clone.id, ensemble});
      candidate = normalize(std::move(candidate));
      if (graph_ok(candidate)) out.push_back(std::move(candidate));
    }
  }
  return out;
}

template <typename T>
const T& pick_uniform(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

}  // namespace

std::vector<MutationOp> builtin_mutations(const std::vector<std::string>& prompt_variants,
                                          const SurrogateMap& surrogates) {
  std::vector<MutationOp> ops;

  ops.push_back(MutationOp{
      "swap-prompt-variant",
      [prompt_variants](const WorkflowGraph& g) {
        return prompt_variants.size() >= 2 && !prompt_swap_targets(g, prompt_variants).empty();
      },
      [prompt_variants](const WorkflowGraph& g,
                        std::mt19937_64& rng) -> std::optional<WorkflowGraph> {
        auto targets = prompt_swap_targets(g, prompt_variants);
        if (prompt_variants.size() < 2 || targets.empty()) return std::nullopt;
        const NodeId& target = pick_uniform(targets, rng);
        WorkflowGraph out = g;
        for (auto& n : out.nodes) {
          if (n.id == target) {
            auto it = std::find(prompt_variants.begin(), prompt_variants.end(), n.prompt_ref);
            size_t idx = static_cast<size_t>(it - prompt_variants.begin());
            n.prompt_ref = prompt_variants[(idx + 1) % prompt_variants.size()];
          }
        }
        return out;
      }});

  ops.push_back(MutationOp{
      "rewire-edge",
      [](const WorkflowGraph& g) { return !rewire_moves(g).empty(); },
      [](const WorkflowGraph& g, std::mt19937_64& rng) -> std::optional<WorkflowGraph> {
        auto moves = rewire_moves(g);
        if (moves.empty()) return std::nullopt;
        return pick_uniform(moves, rng);
      }});

  ops.push_back(MutationOp{
      "toggle-model-tier",
      [surrogates](const WorkflowGraph& g) { return !tier_toggles(g, surrogates).empty(); },
      [surrogates](const WorkflowGraph& g, std::mt19937_64& rng) -> std::optional<WorkflowGraph> {
        auto toggles = tier_toggles(g, surrogates);
        if (toggles.empty()) return std::nullopt;
        const TierToggle& t = pick_uniform(toggles, rng);
        return substitute_model(g, t.node, t.to);
      }});

  ops.push_back(MutationOp{
      "duplicate-then-ensemble",
      [](const WorkflowGraph& g) { return !ensemble_duplications(g).empty(); },
      [](const WorkflowGraph& g, std::mt19937_64& rng) -> std::optional<WorkflowGraph> {
        auto moves = ensemble_duplications(g);
        if (moves.empty()) return std::nullopt;
        return pick_uniform(moves, rng);
      }});

  return ops;
}

namespace {

std::set<std::string> top_k_digests(const CandidatePool& pool, int k) {
  std::vector<std::string> digests = pool.insertion_order;
  std::sort(digests.begin(), digests.end(), [&](const std::string& a, const std::string& b) {
    const EvalOutcome& oa = pool.entries.at(a).outcome;
    const EvalOutcome& ob = pool.entries.at(b).outcome;
    if (oa.avg_score != ob.avg_score) return oa.avg_score > ob.avg_score;
    if (oa.avg_cost_usd != ob.avg_cost_usd) return oa.avg_cost_usd < ob.avg_cost_usd;
    return a < b;
  });
  if (digests.size() > static_cast<size_t>(k)) digests.resize(static_cast<size_t>(k));
  return {digests.begin(), digests.end()};
}

}  // namespace

TuneResult tune(const WorkflowGraph& start, const TunerConfig& cfg,
                const std::vector<MutationOp>& mutations, const Dataset& dataset,
                const Evaluator& evaluator, const PricingTable& pricing,
                CandidatePool& pool, const std::vector<DatasetInstance>& slice) {
  (void)dataset;
  check_tuner_config(cfg);
  ValidationReport rep = validate(start);
  if (!rep.ok) throw graph_error("tune: start graph invalid");

  TuneResult result;
  std::mt19937_64 rng(cfg.seed);

  const std::string start_digest = graph_digest(start);
  if (!pool.entries.count(start_digest)) {
    EvalOutcome out = evaluate(start, slice, evaluator, pricing);
    result.counts.acceptance_evals++;
    pool.insert(start_digest, start, out);
  }
  const double start_score = pool.entries.at(start_digest).outcome.avg_score;

  std::set<std::string> prev_top = top_k_digests(pool, cfg.k);
  int stable_rounds = 0;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    result.rounds = round;

    std::vector<double> scores;
    scores.reserve(pool.insertion_order.size());
    for (const auto& digest : pool.insertion_order)
      scores.push_back(pool.entries.at(digest).outcome.avg_score);
    const std::string parent_digest = pool.insertion_order[mixed_select(
        scores, cfg.lambda, cfg.alpha, rng)];
    const PoolEntry& parent = pool.entries.at(parent_digest);

    std::vector<const MutationOp*> applicable;
    for (const auto& op : mutations) {
      if (op.applicable(parent.graph)) applicable.push_back(&op);
    }
    if (!applicable.empty()) {
      std::uniform_int_distribution<size_t> dist(0, applicable.size() - 1);
      const MutationOp& op = *applicable[dist(rng)];
      std::optional<WorkflowGraph> mutated = op.apply(parent.graph, rng);
      if (mutated) {
        // Average over repeated evaluations to damp evaluator noise.
        EvalOutcome out = evaluate(*mutated, slice, evaluator, pricing);
        result.counts.acceptance_evals++;
        for (int r = 1; r < cfg.repeats; ++r) {
          EvalOutcome again = evaluate(*mutated, slice, evaluator, pricing);
          result.counts.acceptance_evals++;
          out.avg_score += again.avg_score;
          out.avg_cost_usd += again.avg_cost_usd;
        }
        out.avg_score /= cfg.repeats;
        out.avg_cost_usd /= cfg.repeats;

        const std::string digest = graph_digest(*mutated);
        pool.insert(digest, *mutated, out);

        StepRecord rec;
        rec.stage = "tune";
        rec.iteration = round;
        rec.candidate = op.name;
        rec.action = op.name;
        rec.score_before = parent.outcome.avg_score;
        rec.cost_before = parent.outcome.avg_cost_usd;
        rec.score_after = out.avg_score;
        rec.cost_after = out.avg_cost_usd;
        rec.threshold = start_score;
        rec.verdict = out.avg_score > start_score + kScoreEps ? "accepted" : "rejected";
        rec.before_digest = parent_digest;
        rec.after_digest = digest;
        result.records.push_back(std::move(rec));
      }
    }

    std::set<std::string> current_top = top_k_digests(pool, cfg.k);
    if (current_top == prev_top) {
      if (++stable_rounds >= cfg.patience) break;
    } else {
      prev_top = std::move(current_top);
      stable_rounds = 0;
    }
  }

  // Adopt the pool best only on strict improvement over the start.
  std::string best_digest = start_digest;
  for (const auto& digest : pool.insertion_order) {
    const EvalOutcome& out = pool.entries.at(digest).outcome;
    const EvalOutcome& best = pool.entries.at(best_digest).outcome;
    if (out.avg_score > best.avg_score ||
        (out.avg_score == best.avg_score && out.avg_cost_usd < best.avg_cost_usd)) {
      best_digest = digest;
    }
  }
  if (pool.entries.at(best_digest).outcome.avg_score > start_score + kScoreEps) {
    result.graph = pool.entries.at(best_digest).graph;
    result.outcome = pool.entries.at(best_digest).outcome;
  } else {
    result.graph = start;
    result.outcome = pool.entries.at(start_digest).outcome;
  }
  return result;
}

}  // namespace slim
