#include "slim/graph.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace slim {

using json = nlohmann::json;

WorkflowGraph normalize(WorkflowGraph g) {
  std::sort(g.nodes.begin(), g.nodes.end(),
            [](const WorkflowNode& a, const WorkflowNode& b) { return a.id < b.id; });
  std::sort(g.edges.begin(), g.edges.end());
  std::sort(g.entry_ids.begin(), g.entry_ids.end());
  g.entry_ids.erase(std::unique(g.entry_ids.begin(), g.entry_ids.end()), g.entry_ids.end());
  for (auto& n : g.nodes) {
    if (n.id == g.final_id ||
        std::binary_search(g.entry_ids.begin(), g.entry_ids.end(), n.id)) {
      n.is_protected = true;
    }
  }
  return g;
}

const WorkflowNode* find_node(const WorkflowGraph& g, const NodeId& id) {
  for (const auto& n : g.nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

bool has_edge(const WorkflowGraph& g, const NodeId& source, const NodeId& target) {
  for (const auto& e : g.edges) {
    if (e.source == source && e.target == target) return true;
  }
  return false;
}

std::vector<NodeId> predecessors(const WorkflowGraph& g, const NodeId& id) {
  std::vector<NodeId> out;
  for (const auto& e : g.edges) {
    if (e.target == id) out.push_back(e.source);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeId> successors(const WorkflowGraph& g, const NodeId& id) {
  std::vector<NodeId> out;
  for (const auto& e : g.edges) {
    if (e.source == id) out.push_back(e.target);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Reachable set via forward BFS from `starts` over existing edges.
std::set<NodeId> reachable_from(const WorkflowGraph& g, const std::vector<NodeId>& starts) {
  std::set<NodeId> seen(starts.begin(), starts.end());
  std::vector<NodeId> frontier(starts.begin(), starts.end());
  while (!frontier.empty()) {
    NodeId cur = frontier.back();
    frontier.pop_back();
    for (const auto& e : g.edges) {
      if (e.source == cur && seen.insert(e.target).second) frontier.push_back(e.target);
    }
  }
  return seen;
}

bool is_acyclic(const WorkflowGraph& g) {
  std::map<NodeId, int> indeg;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  for (const auto& e : g.edges) {
    if (indeg.count(e.source) && indeg.count(e.target)) indeg[e.target]++;
  }
  std::vector<NodeId> ready;
  for (const auto& [id, d] : indeg) {
    if (d == 0) ready.push_back(id);
  }
  size_t emitted = 0;
  while (!ready.empty()) {
    NodeId cur = ready.back();
    ready.pop_back();
    emitted++;
    for (const auto& e : g.edges) {
      if (e.source == cur && indeg.count(e.target) && --indeg[e.target] == 0) {
        ready.push_back(e.target);
      }
    }
  }
  return emitted == indeg.size();
}

}  // namespace

ValidationReport validate(const WorkflowGraph& g) {
  ValidationReport rep;
  auto add = [&rep](const std::string& v) { rep.violations.push_back(v); };

  if (g.nodes.empty()) add("graph has no nodes");
  std::set<NodeId> ids;
  for (const auto& n : g.nodes) {
    if (n.id.empty()) add("node with empty id");
    if (!ids.insert(n.id).second) add("duplicate node id '" + n.id + "'");
    if (n.operator_kind == op_kind::input && !n.prompt_ref.empty())
      add("Input node '" + n.id + "' must not carry a prompt_ref");
    if (n.operator_kind == op_kind::answer_format && n.dataset.empty())
      add("AnswerFormat node '" + n.id + "' must carry a dataset name");
  }

  std::set<Edge> edge_set;
  for (const auto& e : g.edges) {
    if (e.source == e.target) add("self-loop at " + e.source);
    if (!ids.count(e.source)) add("edge source '" + e.source + "' is not a node");
    if (!ids.count(e.target)) add("edge target '" + e.target + "' is not a node");
    if (!edge_set.insert(e).second)
      add("duplicate edge " + e.source + "->" + e.target);
  }

  if (g.entry_ids.empty()) add("entry_ids is empty");
  for (const auto& id : g.entry_ids) {
    if (!ids.count(id)) add("entry node '" + id + "' is not a node");
  }
  if (!ids.count(g.final_id)) add("final node '" + g.final_id + "' is not a node");

  // Structural checks only make sense on a well-formed edge/node set.
  if (rep.violations.empty()) {
    if (!is_acyclic(g)) add("graph contains a cycle");
  }
  if (rep.violations.empty()) {
    auto from_entries = reachable_from(g, g.entry_ids);
    for (const auto& n : g.nodes) {
      if (!from_entries.count(n.id))
        add("node '" + n.id + "' unreachable from any entry");
    }
    for (const auto& entry : g.entry_ids) {
      if (!reachable_from(g, {entry}).count(g.final_id))
        add("final node '" + g.final_id + "' unreachable from entry '" + entry + "'");
    }
    for (const auto& n : g.nodes) {
      if (n.id == g.final_id ||
          std::binary_search(g.entry_ids.begin(), g.entry_ids.end(), n.id)) {
        if (!n.is_protected)
          add("entry/final node '" + n.id + "' must be protected");
      } else if (!n.is_protected) {
        if (predecessors(g, n.id).empty())
          rep.warnings.push_back("unprotected node '" + n.id + "' has no predecessors");
        if (successors(g, n.id).empty())
          rep.warnings.push_back("unprotected node '" + n.id + "' has no successors");
      }
    }
  }

  rep.ok = rep.violations.empty();
  return rep;
}

std::vector<NodeId> topo_order(const WorkflowGraph& g) {
  std::map<NodeId, int> indeg;
  for (const auto& n : g.nodes) indeg[n.id] = 0;
  for (const auto& e : g.edges) indeg[e.target]++;

  // Min-heap on NodeId gives the lexicographic tie-break.
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (const auto& [id, d] : indeg) {
    if (d == 0) ready.push(id);
  }
  std::vector<NodeId> order;
  order.reserve(g.nodes.size());
  while (!ready.empty()) {
    NodeId cur = ready.top();
    ready.pop();
    order.push_back(cur);
    for (const auto& e : g.edges) {
      if (e.source == cur && --indeg[e.target] == 0) ready.push(e.target);
    }
  }
  if (order.size() != g.nodes.size()) throw graph_error("cycle detected in workflow graph");
  return order;
}

WorkflowGraph remove_node_with_patch(const WorkflowGraph& g, const NodeId& victim) {
  const WorkflowNode* node = find_node(g, victim);
  if (!node) throw graph_error("unknown node '" + victim + "'");
  if (node->is_protected) throw graph_error("node '" + victim + "' is protected");

  auto preds = predecessors(g, victim);
  auto succs = successors(g, victim);

  WorkflowGraph out = g;
  std::erase_if(out.nodes, [&](const WorkflowNode& n) { return n.id == victim; });
  std::erase_if(out.edges,
                [&](const Edge& e) { return e.source == victim || e.target == victim; });
  for (const auto& s : preds) {
    for (const auto& t : succs) {
      if (s != t && !has_edge(out, s, t)) out.edges.push_back({s, t});
    }
  }
  return normalize(std::move(out));
}

WorkflowGraph substitute_model(const WorkflowGraph& g, const NodeId& target,
                               const ModelId& surrogate) {
  const WorkflowNode* node = find_node(g, target);
  if (!node) throw graph_error("unknown node '" + target + "'");
  if (node->is_protected) throw graph_error("node '" + target + "' is protected");

  WorkflowGraph out = g;
  for (auto& n : out.nodes) {
    if (n.id == target) n.model = surrogate;
  }
  return out;
}

std::string serialize(const WorkflowGraph& g) {
  WorkflowGraph c = normalize(g);
  json doc;
  doc["description"] = c.description;
  doc["entry_ids"] = c.entry_ids;
  doc["final_id"] = c.final_id;
  doc["nodes"] = json::array();
  for (const auto& n : c.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["operator"] = n.operator_kind;
    jn["model"] = n.model;
    if (!n.prompt_ref.empty()) jn["prompt_ref"] = n.prompt_ref;
    if (!n.dataset.empty()) jn["dataset"] = n.dataset;
    if (!n.description.empty()) jn["description"] = n.description;
    jn["protected"] = n.is_protected;
    doc["nodes"].push_back(jn);
  }
  doc["edges"] = json::array();
  for (const auto& e : c.edges) {
    doc["edges"].push_back({{"source", e.source}, {"target", e.target}});
  }
  return doc.dump(2) + "\n";
}

WorkflowGraph deserialize(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& ex) {
    throw graph_error(std::string("malformed workflow document: ") + ex.what());
  }
  for (const char* key : {"nodes", "edges", "entry_ids", "final_id"}) {
    if (!doc.contains(key))
      throw graph_error(std::string("workflow document missing field '") + key + "'");
  }

  WorkflowGraph g;
  g.description = doc.value("description", "");
  g.final_id = doc.at("final_id").get<std::string>();
  g.entry_ids = doc.at("entry_ids").get<std::vector<std::string>>();
  try {
    for (const auto& jn : doc.at("nodes")) {
      WorkflowNode n;
      n.id = jn.at("id").get<std::string>();
      n.operator_kind = jn.at("operator").get<std::string>();
      n.model = jn.at("model").get<std::string>();
      n.prompt_ref = jn.value("prompt_ref", "");
      n.dataset = jn.value("dataset", "");
      n.description = jn.value("description", "");
      n.is_protected = jn.value("protected", false);
      g.nodes.push_back(std::move(n));
    }
    for (const auto& je : doc.at("edges")) {
      g.edges.push_back({je.at("source").get<std::string>(),
                         je.at("target").get<std::string>()});
    }
  } catch (const json::exception& ex) {
    throw graph_error(std::string("malformed workflow document: ") + ex.what());
  }

  g = normalize(std::move(g));
  ValidationReport rep = validate(g);
  if (!rep.ok) {
    std::ostringstream msg;
    msg << "invalid workflow document:";
    for (const auto& v : rep.violations) msg << " [" << v << "]";
    throw graph_error(msg.str());
  }
  return g;
}

std::string graph_digest(const WorkflowGraph& g) {
  // FNV-1a 64-bit over the canonical serialization.
  const std::string doc = serialize(g);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : doc) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace slim
