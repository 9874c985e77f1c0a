#include <doctest.h>

#include <cmath>
#include <random>

#include "slim/synthetic.hpp"
#include "slim/tuner.hpp"
#include "test_util.hpp"

using namespace slim;
using namespace slim::testutil;

namespace {

PricingTable two_tier_pricing() {
  PricingTable p;
  p.rates["m"] = {1e-6, 2e-6};
  p.rates["cheap"] = {0.25e-6, 0.5e-6};
  return p;
}

/// Evaluator with a constant score, independent of the graph.
class ConstantEvaluator : public Evaluator {
 public:
  explicit ConstantEvaluator(double score) : score_(score) {}
  InstanceEval run(const WorkflowGraph& graph, const DatasetInstance&) const override {
    InstanceEval ev;
    ev.score = score_;
    for (const auto& n : graph.nodes) ev.calls.push_back({n.id, n.model, 10, 10});
    return ev;
  }

 private:
  double score_;
};

WorkflowGraph ensemble_graph() {
  WorkflowGraph g;
  g.nodes = {node("in", true), node("gen"), node("ens"), node("out", true)};
  g.nodes[1].operator_kind = op_kind::answer_generate;
  g.nodes[1].prompt_ref = "p1";
  g.nodes[2].operator_kind = op_kind::sc_ensemble;
  g.edges = {{"in", "gen"}, {"gen", "ens"}, {"ens", "out"}};
  g.entry_ids = {"in"};
  g.final_id = "out";
  return normalize(std::move(g));
}

}  // namespace

TEST_CASE("mixed probabilities are uniform for equal scores") {
  auto p = mixed_probabilities({0.7, 0.7}, 0.25, 3.0);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("lambda = 1 degenerates to the uniform distribution") {
  auto p = mixed_probabilities({1.0, 0.2, 0.0, 0.9}, 1.0, 5.0);
  for (double v : p) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("mixed probabilities match the selection formula") {
  const double lambda = 0.3, alpha = 0.2;
  const std::vector<double> scores{1.0, 0.8, 0.5};
  auto p = mixed_probabilities(scores, lambda, alpha);

  // Independent arithmetic, written out directly from the definition.
  double z = std::exp(alpha * (1.0 - 1.0)) + std::exp(alpha * (0.8 - 1.0)) +
             std::exp(alpha * (0.5 - 1.0));
  for (size_t i = 0; i < scores.size(); ++i) {
    double expected = lambda / 3.0 + (1.0 - lambda) * std::exp(alpha * (scores[i] - 1.0)) / z;
    CHECK(std::abs(p[i] - expected) <= 1e-15);
  }
  CHECK(p[0] == doctest::Approx(0.3443).epsilon(2e-4));
  CHECK(p[1] == doctest::Approx(0.3347).epsilon(2e-4));
  CHECK(p[2] == doctest::Approx(0.3210).epsilon(2e-4));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mixed_select empirical frequencies track the distribution") {
  std::mt19937_64 rng(2024);
  const std::vector<double> scores{1.0, 0.8, 0.5};
  auto expected = mixed_probabilities(scores, 0.3, 0.2);
  std::vector<int> counts(3, 0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) counts[mixed_select(scores, 0.3, 0.2, rng)]++;
  for (size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(double(counts[i]) / draws - expected[i]) <= 0.02);
  }
  CHECK_THROWS_AS(mixed_probabilities({}, 0.3, 0.2), eval_error);
}

TEST_CASE("toggle-model-tier is inapplicable without a surrogate route") {
  auto ops = builtin_mutations({}, SurrogateMap{});
  const MutationOp* toggle = nullptr;
  for (const auto& op : ops) {
    if (op.name == "toggle-model-tier") toggle = &op;
  }
  REQUIRE(toggle != nullptr);
  CHECK_FALSE(toggle->applicable(ensemble_graph()));

  auto ops2 = builtin_mutations({}, SurrogateMap{{"m", "cheap"}});
  for (const auto& op : ops2) {
    if (op.name == "toggle-model-tier") CHECK(op.applicable(ensemble_graph()));
  }
}

TEST_CASE("swap-prompt-variant with two variants is an involution") {
  auto ops = builtin_mutations({"p1", "p2"}, SurrogateMap{});
  const MutationOp* swap = nullptr;
  for (const auto& op : ops) {
    if (op.name == "swap-prompt-variant") swap = &op;
  }
  REQUIRE(swap != nullptr);
  WorkflowGraph g = ensemble_graph();
  REQUIRE(swap->applicable(g));
  std::mt19937_64 rng(1);
  auto once = swap->apply(g, rng);
  REQUIRE(once.has_value());
  CHECK(find_node(*once, "gen")->prompt_ref == "p2");
  auto twice = swap->apply(*once, rng);
  REQUIRE(twice.has_value());
  CHECK(*twice == g);
}

TEST_CASE("every builtin mutation is pure and validity-preserving") {
  auto ops = builtin_mutations({"p1", "p2"}, SurrogateMap{{"m", "cheap"}});
  std::mt19937_64 rng(31);
  WorkflowGraph g = ensemble_graph();
  const WorkflowGraph original = g;
  for (int trial = 0; trial < 60; ++trial) {
    for (const auto& op : ops) {
      if (!op.applicable(g)) continue;
      auto out = op.apply(g, rng);
      CHECK(g == original);  // purity
      if (out) {
        INFO("mutation ", op.name);
        CHECK(validate(*out).ok);
      }
    }
  }
}

TEST_CASE("duplicate-then-ensemble clones a generator into the ensemble") {
  auto ops = builtin_mutations({}, SurrogateMap{});
  const MutationOp* dup = nullptr;
  for (const auto& op : ops) {
    if (op.name == "duplicate-then-ensemble") dup = &op;
  }
  REQUIRE(dup != nullptr);
  WorkflowGraph g = ensemble_graph();
  REQUIRE(dup->applicable(g));
  std::mt19937_64 rng(5);
  auto out = dup->apply(g, rng);
  REQUIRE(out.has_value());
  CHECK(out->nodes.size() == g.nodes.size() + 1);
  CHECK(find_node(*out, "gen_copy") != nullptr);
  CHECK(has_edge(*out, "gen_copy", "ens"));
  CHECK(validate(*out).ok);
}

TEST_CASE("a constant evaluator leaves the start graph unchanged and stops early") {
  WorkflowGraph g = ensemble_graph();
  ConstantEvaluator ev(0.6);
  CandidatePool pool;
  TunerConfig cfg;
  cfg.seed = 3;
  cfg.patience = 2;
  cfg.max_rounds = 40;
  // Restrict to prompt swaps so the reachable graph set is tiny and the
  // top-k must stabilize.
  std::vector<MutationOp> mutations;
  for (auto& op : builtin_mutations({"p1", "p2"}, SurrogateMap{})) {
    if (op.name == "swap-prompt-variant") mutations.push_back(std::move(op));
  }
  auto slice = tiny_dataset().instances;
  TuneResult res =
      tune(g, cfg, mutations, tiny_dataset(), ev, two_tier_pricing(), pool, slice);

  CHECK(graph_digest(res.graph) == graph_digest(g));
  CHECK(res.rounds < cfg.max_rounds);  // early stop fired
  for (const auto& rec : res.records) CHECK(rec.verdict == "rejected");
}

TEST_CASE("patience 1 with an immediately stable top-k runs exactly one round") {
  WorkflowGraph g = ensemble_graph();
  ConstantEvaluator ev(0.6);
  CandidatePool pool;
  TunerConfig cfg;
  cfg.seed = 3;
  cfg.patience = 1;
  // No applicable mutations: the pool cannot change.
  TuneResult res = tune(g, cfg, {}, tiny_dataset(), ev, two_tier_pricing(), pool,
                        tiny_dataset().instances);
  CHECK(res.rounds == 1);
  CHECK(graph_digest(res.graph) == graph_digest(g));
}

TEST_CASE("tune recovers a one-step reachable improvement") {
  // The start graph is bound to the low tier with a 0.05 penalty;
  // toggle-model-tier back to the high tier recovers exactly that score.
  WorkflowGraph g = ensemble_graph();
  for (auto& n : g.nodes) {
    if (n.id == "gen") n.model = "cheap";
  }
  SyntheticTaskSpec spec = parse_synthetic_spec(
      "{\"contributions\": {\"gen\": 0.5, \"ens\": 0.3},"
      " \"quant_penalty\": {\"gen\": 0.05},"
      " \"low_tier_models\": [\"cheap\"],"
      " \"tokens\": {\"gen\": {\"input\": 50, \"output\": 50}}}");
  SyntheticEvaluator ev(spec);
  CandidatePool pool;
  TunerConfig cfg;
  cfg.seed = 11;
  cfg.max_rounds = 30;
  cfg.patience = 30;  // let the search run
  auto mutations = builtin_mutations({}, SurrogateMap{{"m", "cheap"}});
  TuneResult res = tune(g, cfg, mutations, tiny_dataset(), ev, two_tier_pricing(), pool,
                        tiny_dataset().instances);

  CHECK(res.outcome.avg_score == doctest::Approx(0.8));
  CHECK(find_node(res.graph, "gen")->model == "m");
  bool improved = false;
  for (const auto& rec : res.records) {
    if (rec.verdict == "accepted") improved = true;
  }
  CHECK(improved);
}

TEST_CASE("tune never returns a lower-scoring graph than its input") {
  SyntheticTaskSpec spec = parse_synthetic_spec(
      "{\"contributions\": {\"gen\": 0.5, \"ens\": 0.2},"
      " \"quant_penalty\": {\"gen\": 0.1, \"ens\": 0.05},"
      " \"low_tier_models\": [\"cheap\"],"
      " \"tokens\": {\"gen\": {\"input\": 50, \"output\": 50},"
      "              \"ens\": {\"input\": 30, \"output\": 30}}}");
  SyntheticEvaluator ev(spec);
  auto mutations = builtin_mutations({"p1", "p2"}, SurrogateMap{{"m", "cheap"}});
  WorkflowGraph g = ensemble_graph();
  auto slice = tiny_dataset().instances;
  PricingTable pricing = two_tier_pricing();
  double start_score = evaluate(g, slice, ev, pricing).avg_score;
  for (uint64_t seed = 0; seed < 12; ++seed) {
    CandidatePool pool;
    TunerConfig cfg;
    cfg.seed = seed;
    cfg.max_rounds = 10;
    TuneResult res = tune(g, cfg, mutations, tiny_dataset(), ev, pricing, pool, slice);
    CHECK(res.outcome.avg_score + 1e-9 >= start_score);
  }
}

TEST_CASE("tuner rejects invalid configuration") {
  TunerConfig bad;
  bad.lambda = 1.5;
  CandidatePool pool;
  ConstantEvaluator ev(0.5);
  CHECK_THROWS_AS(tune(ensemble_graph(), bad, {}, tiny_dataset(), ev, two_tier_pricing(), pool,
                       tiny_dataset().instances),
                  eval_error);
}
