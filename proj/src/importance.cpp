#include "slim/importance.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace slim {

int degree_signal(const WorkflowGraph& g, const NodeId& v) {
  if (!find_node(g, v)) throw graph_error("unknown node '" + v + "'");
  int deg = 0;
  for (const auto& e : g.edges) {
    if (e.source == v) deg++;
    if (e.target == v) deg++;
  }
  return deg;
}

std::map<NodeId, double> betweenness_all(const WorkflowGraph& g) {
  // Brandes' accumulation over each source, directed, unit edge lengths.
  std::vector<NodeId> ids;
  for (const auto& n : g.nodes) ids.push_back(n.id);
  std::map<NodeId, size_t> index;
  for (size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  const size_t n = ids.size();

  std::vector<std::vector<size_t>> adj(n);
  for (const auto& e : g.edges) adj[index.at(e.source)].push_back(index.at(e.target));

  std::vector<double> centrality(n, 0.0);
  for (size_t s = 0; s < n; ++s) {
    std::vector<double> sigma(n, 0.0);
    std::vector<long> dist(n, -1);
    std::vector<std::vector<size_t>> preds(n);
    std::vector<size_t> order;

    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<size_t> queue{s};
    while (!queue.empty()) {
      size_t v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (size_t w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }

    std::vector<double> delta(n, 0.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      size_t w = *it;
      for (size_t v : preds[w]) {
        delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      }
      if (w != s) centrality[w] += delta[w];
    }
  }

  std::map<NodeId, double> out;
  for (size_t i = 0; i < n; ++i) out[ids[i]] = centrality[i];
  return out;
}

double betweenness_signal(const WorkflowGraph& g, const NodeId& v) {
  auto all = betweenness_all(g);
  auto it = all.find(v);
  if (it == all.end()) throw graph_error("unknown node '" + v + "'");
  return it->second;
}

WorkflowGraph loo_variant(const WorkflowGraph& g, const NodeId& v, LooMode mode,
                          const std::map<ModelId, ModelId>& surrogates) {
  if (mode == LooMode::prune) return remove_node_with_patch(g, v);
  const WorkflowNode* node = find_node(g, v);
  if (!node) throw graph_error("unknown node '" + v + "'");
  auto it = surrogates.find(node->model);
  if (it == surrogates.end())
    throw graph_error("no surrogate mapping for model '" + node->model + "'");
  return substitute_model(g, v, it->second);
}

SignalSet loo_signals(const WorkflowGraph& g, const NodeId& v, LooMode mode,
                      const std::map<ModelId, ModelId>& surrogates,
                      const std::vector<DatasetInstance>& slice,
                      const Evaluator& evaluator, const PricingTable& pricing,
                      const EvalOutcome& baseline,
                      const std::map<NodeId, double>& betweenness) {
  SignalSet s;
  s.node = v;
  s.s_deg = degree_signal(g, v);
  s.s_bet = betweenness.at(v);
  WorkflowGraph variant = loo_variant(g, v, mode, surrogates);
  EvalOutcome out = evaluate(variant, slice, evaluator, pricing);
  s.delta_score = baseline.avg_score - out.avg_score;
  s.delta_cost = baseline.avg_cost_usd - out.avg_cost_usd;
  return s;
}

namespace {

// Dense prune-priority ranks: sorted by key, equal keys share a rank,
// the next distinct key gets rank + 1.
template <typename Key>
std::map<NodeId, int> dense_ranks(const std::vector<SignalSet>& signals, Key key,
                                  bool descending) {
  std::vector<std::pair<double, NodeId>> items;
  items.reserve(signals.size());
  for (const auto& s : signals) items.emplace_back(key(s), s.node);
  std::sort(items.begin(), items.end(), [&](const auto& a, const auto& b) {
    return descending ? a.first > b.first : a.first < b.first;
  });
  std::map<NodeId, int> ranks;
  int rank = 0;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i == 0 || items[i].first != items[i - 1].first) rank++;
    ranks[items[i].second] = rank;
  }
  return ranks;
}

}  // namespace

RankTable rank_and_fuse(const std::vector<SignalSet>& signals, const FusionConfig& config,
                        size_t graph_node_count) {
  if (signals.empty()) throw std::invalid_argument("rank_and_fuse: empty candidate set");
  if (config.w_deg < 0 || config.w_bet < 0 || config.w_shap < 0 || config.w_dcost < 0)
    throw std::invalid_argument("rank_and_fuse: weights must be non-negative");
  if (config.w_deg + config.w_bet + config.w_shap + config.w_dcost <= 0)
    throw std::invalid_argument("rank_and_fuse: at least one weight must be positive");

  RankTable table;
  table.kappa = std::max<int>(10, static_cast<int>(graph_node_count));
  table.rank_deg = dense_ranks(signals, [](const SignalSet& s) { return double(s.s_deg); }, false);
  table.rank_bet = dense_ranks(signals, [](const SignalSet& s) { return s.s_bet; }, false);
  table.rank_shap = dense_ranks(signals, [](const SignalSet& s) { return s.delta_score; }, false);
  table.rank_dcost = dense_ranks(signals, [](const SignalSet& s) { return s.delta_cost; }, true);

  for (const auto& s : signals) {
    double fused = config.w_deg / (table.kappa + table.rank_deg.at(s.node)) +
                   config.w_bet / (table.kappa + table.rank_bet.at(s.node)) +
                   config.w_shap / (table.kappa + table.rank_shap.at(s.node)) +
                   config.w_dcost / (table.kappa + table.rank_dcost.at(s.node));
    table.fused[s.node] = fused;
    table.candidate_order.push_back(s.node);
  }
  std::sort(table.candidate_order.begin(), table.candidate_order.end(),
            [&](const NodeId& a, const NodeId& b) {
              double fa = table.fused.at(a), fb = table.fused.at(b);
              return fa != fb ? fa > fb : a < b;
            });
  return table;
}

}  // namespace slim
