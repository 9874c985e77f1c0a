#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace slim {

using NodeId = std::string;
using ModelId = std::string;

/// Thrown for structural misuse of a graph (unknown node, protected node,
/// cycle where a DAG is required).
class graph_error : public std::runtime_error {
 public:
  explicit graph_error(const std::string& what) : std::runtime_error(what) {}
};

/// Well-known operator kinds. The field is an open string so user-defined
/// kinds pass through untouched.
namespace op_kind {
inline constexpr const char* input = "Input";
inline constexpr const char* answer_generate = "AnswerGenerate";
inline constexpr const char* programmer = "Programmer";
inline constexpr const char* custom_code_generate = "CustomCodeGenerate";
inline constexpr const char* test = "Test";
inline constexpr const char* sc_ensemble = "ScEnsemble";
inline constexpr const char* code_refine = "CodeRefine";
inline constexpr const char* custom = "Custom";
inline constexpr const char* answer_format = "AnswerFormat";
}  // namespace op_kind

struct WorkflowNode {
  NodeId id;
  std::string operator_kind;
  ModelId model;
  std::string prompt_ref;   // key into a prompt store; empty = none
  std::string dataset;      // AnswerFormat nodes carry a dataset name
  std::string description;
  bool is_protected = false;

  bool operator==(const WorkflowNode&) const = default;
};

struct Edge {
  NodeId source;
  NodeId target;

  bool operator==(const Edge&) const = default;
  bool operator<(const Edge& other) const {
    return source != other.source ? source < other.source : target < other.target;
  }
};

/// A directed acyclic workflow graph. Treated as an immutable value: all
/// edits (surgery, substitution) produce new graphs.
struct WorkflowGraph {
  std::vector<WorkflowNode> nodes;  // sorted by id after normalize()
  std::vector<Edge> edges;          // sorted by (source, target)
  std::vector<NodeId> entry_ids;    // sorted
  NodeId final_id;
  std::string description;

  bool operator==(const WorkflowGraph&) const = default;
};

struct ValidationReport {
  bool ok = false;
  std::vector<std::string> violations;
  std::vector<std::string> warnings;  // e.g. unprotected node with no preds/succs
};

/// Sorts nodes/edges/entry ids and forces the protected flag on entry and
/// final nodes. Surgery and deserialization always return normalized graphs.
WorkflowGraph normalize(WorkflowGraph g);

ValidationReport validate(const WorkflowGraph& g);

const WorkflowNode* find_node(const WorkflowGraph& g, const NodeId& id);
bool has_edge(const WorkflowGraph& g, const NodeId& source, const NodeId& target);
std::vector<NodeId> predecessors(const WorkflowGraph& g, const NodeId& id);
std::vector<NodeId> successors(const WorkflowGraph& g, const NodeId& id);

/// Topological order; ties broken by NodeId lexicographic order.
/// Throws graph_error on a cycle.
std::vector<NodeId> topo_order(const WorkflowGraph& g);

/// Removes `victim` and patches every (predecessor, successor) pair with a
/// direct edge unless one already exists. Pure: the input is unmodified.
WorkflowGraph remove_node_with_patch(const WorkflowGraph& g, const NodeId& victim);

/// Rebinds `target` to `surrogate`, leaving topology untouched. Pure.
WorkflowGraph substitute_model(const WorkflowGraph& g, const NodeId& target,
                               const ModelId& surrogate);

/// Canonical document form: nodes and edges sorted by id, stable key order,
/// byte-identical for equal graphs.
std::string serialize(const WorkflowGraph& g);

/// Parses, normalizes and validates. Throws graph_error on malformed
/// documents or invariant violations.
WorkflowGraph deserialize(const std::string& document);

/// Digest of the canonical serialization (16 hex chars).
std::string graph_digest(const WorkflowGraph& g);

}  // namespace slim
