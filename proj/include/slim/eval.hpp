#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slim/graph.hpp"

namespace slim {

class eval_error : public std::runtime_error {
 public:
  explicit eval_error(const std::string& what) : std::runtime_error(what) {}
};

struct DatasetInstance {
  std::string id;
  std::string input;
  std::string target;
};

struct Dataset {
  std::string id;
  std::vector<DatasetInstance> instances;
};

/// Line-delimited records {id, input, target}, one JSON object per line.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset(const std::string& text, const std::string& dataset_id);

struct ModelRates {
  double input_rate = 0.0;   // USD per input token
  double output_rate = 0.0;  // USD per output token
};

struct PricingTable {
  std::map<ModelId, ModelRates> rates;

  const ModelRates& at(const ModelId& model) const;
  bool has(const ModelId& model) const { return rates.count(model) > 0; }
};

/// Pricing file: JSON map model id -> {input_rate, output_rate}, rates given
/// as numbers or decimal strings (USD per token).
PricingTable load_pricing(const std::string& path);
PricingTable parse_pricing(const std::string& text);

/// Throws eval_error if any model bound in the graph is missing a rate.
void ensure_priced(const WorkflowGraph& g, const PricingTable& pricing);

struct ProbeSlice {
  std::string dataset_id;
  std::vector<std::string> instance_ids;
  uint64_t seed = 0;
  bool truncated = false;  // true when requested m exceeded the dataset size
};

/// Uniform sample of m instance ids without replacement, reproducible from
/// the seed. m >= |dataset| returns the whole (sorted) id set.
ProbeSlice sample_probe(const Dataset& dataset, size_t m, uint64_t seed);

std::vector<DatasetInstance> slice_instances(const Dataset& dataset, const ProbeSlice& slice);

struct NodeCall {
  NodeId node;
  ModelId model;
  int64_t input_tokens = 0;
  int64_t output_tokens = 0;
};

struct InstanceEval {
  double score = 0.0;
  std::vector<NodeCall> calls;
  std::string error;  // non-empty when the instance failed
};

/// One workflow execution backend. Implementations must be deterministic
/// given their own seed and safe under concurrent independent invocations
/// unless max_parallelism() returns 1.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual InstanceEval run(const WorkflowGraph& graph, const DatasetInstance& instance) const = 0;
  virtual int max_parallelism() const { return 1; }
};

struct InstanceRecord {
  std::string id;
  double score = 0.0;
  double cost_usd = 0.0;
  int64_t input_tokens = 0;
  int64_t output_tokens = 0;
  std::string error;
};

struct EvalOutcome {
  double avg_score = 0.0;
  double avg_cost_usd = 0.0;
  std::vector<InstanceRecord> per_instance;
};

/// Runs the evaluator on every instance and averages score and USD cost.
/// Instance failures score 0 with the error recorded; the run continues.
EvalOutcome evaluate(const WorkflowGraph& graph,
                     const std::vector<DatasetInstance>& instances,
                     const Evaluator& evaluator, const PricingTable& pricing);

}  // namespace slim
