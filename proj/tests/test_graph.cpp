#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "slim/graph.hpp"
#include "test_util.hpp"

using namespace slim;
using namespace slim::testutil;

namespace {

bool mentions(const std::vector<std::string>& messages, const std::string& needle) {
  return std::any_of(messages.begin(), messages.end(), [&](const std::string& m) {
    return m.find(needle) != std::string::npos;
  });
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("validate accepts a minimal three-node chain") {
  WorkflowGraph g = chain({"Input", "Reasoner", "Formatter"});
  ValidationReport rep = validate(g);
  CHECK(rep.ok);
  CHECK(rep.violations.empty());
}

TEST_CASE("validate flags self-loops") {
  WorkflowGraph g = chain({"a", "b"});
  g.edges.push_back({"a", "a"});
  g = normalize(std::move(g));
  ValidationReport rep = validate(g);
  CHECK_FALSE(rep.ok);
  CHECK(mentions(rep.violations, "self-loop"));
  CHECK(mentions(rep.violations, "a"));
}

TEST_CASE("validate flags a final node unreachable from an entry") {
  WorkflowGraph g;
  g.nodes = {node("a", true), node("b"), node("z", true)};
  g.edges = {{"a", "b"}};
  g.entry_ids = {"a"};
  g.final_id = "z";
  g = normalize(std::move(g));
  ValidationReport rep = validate(g);
  CHECK_FALSE(rep.ok);
  CHECK(mentions(rep.violations, "z"));
}

TEST_CASE("validate flags duplicate edges and unknown endpoints") {
  WorkflowGraph g = chain({"a", "b", "c"});
  g.edges.push_back({"a", "b"});
  ValidationReport rep = validate(g);
  CHECK_FALSE(rep.ok);
  CHECK(mentions(rep.violations, "duplicate"));

  WorkflowGraph h = chain({"a", "b"});
  h.edges.push_back({"a", "ghost"});
  rep = validate(h);
  CHECK_FALSE(rep.ok);
  CHECK(mentions(rep.violations, "ghost"));
}

TEST_CASE("validate flags cycles") {
  WorkflowGraph g = chain({"a", "b", "c"});
  g.edges.push_back({"c", "b"});
  ValidationReport rep = validate(g);
  CHECK_FALSE(rep.ok);
  CHECK(mentions(rep.violations, "cycl"));
}

TEST_CASE("normalize forces protection on entry and final nodes") {
  WorkflowGraph g;
  g.nodes = {node("a"), node("b"), node("c")};
  g.edges = {{"a", "b"}, {"b", "c"}};
  g.entry_ids = {"a"};
  g.final_id = "c";
  g = normalize(std::move(g));
  CHECK(find_node(g, "a")->is_protected);
  CHECK(find_node(g, "c")->is_protected);
  CHECK_FALSE(find_node(g, "b")->is_protected);
}

TEST_CASE("remove_node_with_patch bridges a chain") {
  WorkflowGraph g = chain({"a", "v", "b"});
  WorkflowGraph out = remove_node_with_patch(g, "v");
  CHECK(out.nodes.size() == 2);
  CHECK(out.edges == std::vector<Edge>{{"a", "b"}});
  CHECK(validate(out).ok);
}

TEST_CASE("remove_node_with_patch never duplicates an existing edge") {
  // Diamond a->v, a->b, v->b: removing v must leave a->b exactly once.
  WorkflowGraph g;
  g.nodes = {node("a", true), node("v"), node("b", true)};
  g.edges = {{"a", "v"}, {"a", "b"}, {"v", "b"}};
  g.entry_ids = {"a"};
  g.final_id = "b";
  g = normalize(std::move(g));
  WorkflowGraph out = remove_node_with_patch(g, "v");
  CHECK(out.edges == std::vector<Edge>{{"a", "b"}});
}

TEST_CASE("remove_node_with_patch patches the full In(v) x Out(v) product") {
  WorkflowGraph g;
  g.nodes = {node("e", true), node("a"), node("c"), node("v"), node("b"), node("d"),
             node("f", true)};
  g.edges = {{"e", "a"}, {"e", "c"}, {"a", "v"}, {"c", "v"},
             {"v", "b"}, {"v", "d"}, {"b", "f"}, {"d", "f"}};
  g.entry_ids = {"e"};
  g.final_id = "f";
  g = normalize(std::move(g));
  REQUIRE(validate(g).ok);

  // Oracle: brute-force enumeration of predecessor/successor pairs.
  std::set<Edge> expected;
  for (const auto& edge : g.edges) {
    if (edge.source != "v" && edge.target != "v") expected.insert(edge);
  }
  for (const auto& s : predecessors(g, "v")) {
    for (const auto& t : successors(g, "v")) expected.insert({s, t});
  }

  WorkflowGraph out = remove_node_with_patch(g, "v");
  CHECK(std::set<Edge>(out.edges.begin(), out.edges.end()) == expected);
  CHECK(out.edges.size() == 8);  // 4 untouched + 4 patch edges
  CHECK(validate(out).ok);
}

TEST_CASE("remove_node_with_patch rejects unknown and protected victims") {
  WorkflowGraph g = chain({"a", "v", "b"});
  CHECK_THROWS_AS(remove_node_with_patch(g, "ghost"), graph_error);
  CHECK_THROWS_AS(remove_node_with_patch(g, "a"), graph_error);
}

TEST_CASE("remove_node_with_patch is pure") {
  WorkflowGraph g = chain({"a", "v", "b"});
  WorkflowGraph copy = g;
  (void)remove_node_with_patch(g, "v");
  CHECK(g == copy);
}

TEST_CASE("surgery closure and reachability preservation on random DAGs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    WorkflowGraph g = random_dag(7, 0.4, rng);
    REQUIRE(validate(g).ok);
    for (const auto& n : g.nodes) {
      if (n.is_protected) continue;
      auto preds = predecessors(g, n.id);
      auto succs = successors(g, n.id);
      WorkflowGraph out = remove_node_with_patch(g, n.id);
      CHECK(validate(out).ok);
      // Every pair previously connected through the victim stays connected.
      for (const auto& s : preds) {
        for (const auto& t : succs) CHECK(has_edge(out, s, t));
      }
    }
  }
}

TEST_CASE("substitute_model changes only the binding") {
  WorkflowGraph g = chain({"a", "v", "b"});
  WorkflowGraph out = substitute_model(g, "v", "cheap");
  CHECK(out.edges == g.edges);
  CHECK(find_node(out, "v")->model == "cheap");
  CHECK(find_node(g, "v")->model == "m");  // purity
  CHECK(substitute_model(g, "v", "m") == g);  // identity case
  CHECK_THROWS_AS(substitute_model(g, "ghost", "cheap"), graph_error);
  CHECK_THROWS_AS(substitute_model(g, "a", "cheap"), graph_error);
}

TEST_CASE("substitution commutes with surgery on disjoint targets") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    WorkflowGraph g = random_dag(5, 0.5, rng);
    NodeId victim, target;
    for (const auto& n : g.nodes) {
      if (n.is_protected) continue;
      if (victim.empty())
        victim = n.id;
      else if (target.empty())
        target = n.id;
    }
    if (target.empty()) continue;
    WorkflowGraph ab = remove_node_with_patch(substitute_model(g, target, "x"), victim);
    WorkflowGraph ba = substitute_model(remove_node_with_patch(g, victim), target, "x");
    CHECK(ab == ba);
  }
}

TEST_CASE("topo_order respects edges and breaks ties lexicographically") {
  CHECK(topo_order(chain({"a", "b", "c"})) == std::vector<NodeId>{"a", "b", "c"});

  // Two parallel branches from one entry: heads ordered by NodeId.
  WorkflowGraph g;
  g.nodes = {node("e", true), node("y"), node("x"), node("f", true)};
  g.edges = {{"e", "y"}, {"e", "x"}, {"y", "f"}, {"x", "f"}};
  g.entry_ids = {"e"};
  g.final_id = "f";
  g = normalize(std::move(g));
  CHECK(topo_order(g) == std::vector<NodeId>{"e", "x", "y", "f"});

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    WorkflowGraph r = random_dag(8, 0.4, rng);
    std::vector<NodeId> order = topo_order(r);
    REQUIRE(order.size() == r.nodes.size());
    auto pos = [&](const NodeId& id) {
      return std::find(order.begin(), order.end(), id) - order.begin();
    };
    for (const auto& e : r.edges) CHECK(pos(e.source) < pos(e.target));
  }
}

TEST_CASE("topo_order reports cycles") {
  WorkflowGraph g = chain({"a", "b", "c"});
  g.edges.push_back({"c", "b"});
  CHECK_THROWS_AS(topo_order(g), graph_error);
}

TEST_CASE("serialize round-trips byte-identically") {
  WorkflowGraph g = chain({"Input", "Reasoner", "Formatter"});
  std::string doc = serialize(g);
  WorkflowGraph back = deserialize(doc);
  CHECK(back == g);
  CHECK(serialize(back) == doc);
}

TEST_CASE("deserialize names missing schema fields") {
  CHECK_THROWS_WITH_AS(deserialize("{\"nodes\": [], \"edges\": [], \"entry_ids\": []}"),
                       doctest::Contains("final_id"), graph_error);
  CHECK_THROWS_AS(deserialize("not json"), graph_error);
}

TEST_CASE("deserialize rejects invalid graphs") {
  WorkflowGraph g = chain({"a", "b"});
  g.edges.push_back({"b", "a"});
  CHECK_THROWS_AS(deserialize(serialize(g)), graph_error);
}

TEST_CASE("the bundled math workflow document round-trips") {
  std::string doc = read_file(data_path("demo_workflow.json"));
  WorkflowGraph g = deserialize(doc);
  CHECK(g.nodes.size() == 8);
  CHECK(find_node(g, "GenerateSolutionA") != nullptr);
  CHECK(find_node(g, "GenerateSolutionB") != nullptr);
  CHECK(find_node(g, "ScEnsembler")->operator_kind == op_kind::sc_ensemble);
  CHECK(deserialize(serialize(g)) == g);
  CHECK(serialize(deserialize(serialize(g))) == serialize(g));
}

TEST_CASE("graph digests are stable and discriminating") {
  WorkflowGraph g = chain({"a", "v", "b"});
  CHECK(graph_digest(g) == graph_digest(chain({"a", "v", "b"})));
  CHECK(graph_digest(g).size() == 16);
  CHECK(graph_digest(g) != graph_digest(remove_node_with_patch(g, "v")));
  CHECK(graph_digest(g) != graph_digest(substitute_model(g, "v", "cheap")));
}

TEST_CASE("validate warns about unprotected nodes with no predecessors or successors") {
  WorkflowGraph g = chain({"a", "b", "c"});
  g.nodes.push_back(node("loose"));
  g.edges.push_back({"loose", "c"});
  g = normalize(std::move(g));
  ValidationReport rep = validate(g);
  CHECK_FALSE(rep.ok);  // loose is unreachable from the entry
  CHECK(mentions(rep.warnings, "loose"));
}
