#include "slim/eval.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

#include <json.hpp>

namespace slim {

using json = nlohmann::json;

Dataset parse_dataset(const std::string& text, const std::string& dataset_id) {
  Dataset ds;
  ds.id = dataset_id;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& ex) {
      throw eval_error("dataset line " + std::to_string(lineno) + ": " + ex.what());
    }
    DatasetInstance inst;
    inst.id = rec.at("id").get<std::string>();
    inst.input = rec.at("input").get<std::string>();
    const auto& target = rec.at("target");
    inst.target = target.is_string() ? target.get<std::string>() : target.dump();
    if (seen[inst.id]) throw eval_error("duplicate dataset instance id '" + inst.id + "'");
    seen[inst.id] = true;
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw eval_error("cannot open dataset file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), path);
}

const ModelRates& PricingTable::at(const ModelId& model) const {
  auto it = rates.find(model);
  if (it == rates.end()) throw eval_error("no pricing entry for model '" + model + "'");
  return it->second;
}

namespace {

double parse_rate(const json& v, const std::string& model) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return std::stod(v.get<std::string>());
  throw eval_error("pricing rate for '" + model + "' must be a number or decimal string");
}

}  // namespace

PricingTable parse_pricing(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw eval_error(std::string("malformed pricing table: ") + ex.what());
  }
  PricingTable table;
  for (const auto& [model, entry] : doc.items()) {
    ModelRates r;
    r.input_rate = parse_rate(entry.at("input_rate"), model);
    r.output_rate = parse_rate(entry.at("output_rate"), model);
    if (r.input_rate < 0 || r.output_rate < 0)
      throw eval_error("negative rate for model '" + model + "'");
    table.rates[model] = r;
  }
  return table;
}

PricingTable load_pricing(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw eval_error("cannot open pricing file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pricing(buf.str());
}

void ensure_priced(const WorkflowGraph& g, const PricingTable& pricing) {
  for (const auto& n : g.nodes) {
    if (!pricing.has(n.model))
      throw eval_error("model '" + n.model + "' bound at node '" + n.id +
                       "' has no pricing entry");
  }
}

ProbeSlice sample_probe(const Dataset& dataset, size_t m, uint64_t seed) {
  if (dataset.instances.empty()) throw eval_error("cannot sample from an empty dataset");
  if (m < 1) throw eval_error("probe size must be >= 1");

  std::vector<std::string> ids;
  ids.reserve(dataset.instances.size());
  for (const auto& inst : dataset.instances) ids.push_back(inst.id);
  std::sort(ids.begin(), ids.end());

  ProbeSlice slice;
  slice.dataset_id = dataset.id;
  slice.seed = seed;
  if (m >= ids.size()) {
    slice.truncated = m > ids.size();
    slice.instance_ids = std::move(ids);
    return slice;
  }

  // Partial Fisher-Yates over the sorted id list, then re-sort the sample.
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<size_t> pick(i, ids.size() - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  slice.instance_ids = std::move(ids);
  return slice;
}

std::vector<DatasetInstance> slice_instances(const Dataset& dataset, const ProbeSlice& slice) {
  std::map<std::string, const DatasetInstance*> by_id;
  for (const auto& inst : dataset.instances) by_id[inst.id] = &inst;
  std::vector<DatasetInstance> out;
  out.reserve(slice.instance_ids.size());
  for (const auto& id : slice.instance_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw eval_error("probe slice references unknown instance '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

EvalOutcome evaluate(const WorkflowGraph& graph,
                     const std::vector<DatasetInstance>& instances,
                     const Evaluator& evaluator, const PricingTable& pricing) {
  if (instances.empty()) throw eval_error("evaluate called with no instances");
  ensure_priced(graph, pricing);

  auto run_one = [&](const DatasetInstance& inst) {
    InstanceRecord rec;
    rec.id = inst.id;
    InstanceEval ev;
    try {
      ev = evaluator.run(graph, inst);
    } catch (const std::exception& ex) {
      ev.score = 0.0;
      ev.calls.clear();
      ev.error = ex.what();
    }
    rec.score = std::clamp(ev.score, 0.0, 1.0);
    rec.error = ev.error;
    if (!ev.error.empty()) rec.score = 0.0;
    for (const auto& call : ev.calls) {
      const ModelRates& r = pricing.at(call.model);
      rec.cost_usd += static_cast<double>(call.input_tokens) * r.input_rate +
                      static_cast<double>(call.output_tokens) * r.output_rate;
      rec.input_tokens += call.input_tokens;
      rec.output_tokens += call.output_tokens;
    }
    return rec;
  };

  EvalOutcome outcome;
  outcome.per_instance.resize(instances.size());
  const int parallelism =
      std::min<int>(evaluator.max_parallelism(), static_cast<int>(instances.size()));
  if (parallelism > 1) {
    size_t next = 0;
    while (next < instances.size()) {
      size_t batch_end = std::min(instances.size(), next + static_cast<size_t>(parallelism));
      std::vector<std::future<InstanceRecord>> futures;
      for (size_t i = next; i < batch_end; ++i) {
        futures.push_back(
            std::async(std::launch::async, [&, i] { return run_one(instances[i]); }));
      }
      for (size_t i = next; i < batch_end; ++i) {
        outcome.per_instance[i] = futures[i - next].get();
      }
      next = batch_end;
    }
  } else {
    for (size_t i = 0; i < instances.size(); ++i) {
      outcome.per_instance[i] = run_one(instances[i]);
    }
  }

  // Index-order aggregation keeps results identical regardless of scheduling.
  for (const auto& rec : outcome.per_instance) {
    outcome.avg_score += rec.score;
    outcome.avg_cost_usd += rec.cost_usd;
  }
  outcome.avg_score /= static_cast<double>(instances.size());
  outcome.avg_cost_usd /= static_cast<double>(instances.size());
  return outcome;
}

}  // namespace slim
