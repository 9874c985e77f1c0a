#include "slim/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace slim {

using json = nlohmann::json;

SyntheticTaskSpec parse_synthetic_spec(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw eval_error(std::string("malformed synthetic spec: ") + ex.what());
  }
  SyntheticTaskSpec spec;
  if (doc.contains("contributions")) {
    for (const auto& [node, w] : doc["contributions"].items()) {
      double v = w.get<double>();
      if (v < 0) throw eval_error("negative contribution for node '" + node + "'");
      spec.contributions[node] = v;
    }
  }
  if (doc.contains("tokens")) {
    for (const auto& [node, t] : doc["tokens"].items()) {
      spec.tokens[node] = {t.at("input").get<int64_t>(), t.at("output").get<int64_t>()};
    }
  }
  if (doc.contains("redundancy_groups")) {
    std::set<NodeId> seen;
    for (const auto& group : doc["redundancy_groups"]) {
      std::vector<NodeId> members = group.get<std::vector<NodeId>>();
      for (const auto& m : members) {
        if (!seen.insert(m).second)
          throw eval_error("node '" + m + "' appears in multiple redundancy groups");
      }
      spec.redundancy_groups.push_back(std::move(members));
    }
  }
  if (doc.contains("quant_penalty")) {
    for (const auto& [node, p] : doc["quant_penalty"].items()) {
      spec.quant_penalty[node] = p.get<double>();
    }
  }
  if (doc.contains("low_tier_models")) {
    for (const auto& m : doc["low_tier_models"]) spec.low_tier_models.insert(m.get<std::string>());
  }
  spec.noise_amplitude = doc.value("noise_amplitude", 0.0);
  if (spec.noise_amplitude < 0) throw eval_error("noise amplitude must be >= 0");
  spec.seed = doc.value("seed", 0ull);
  return spec;
}

SyntheticTaskSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw eval_error("cannot open synthetic spec '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_synthetic_spec(buf.str());
}

SyntheticEvaluator::SyntheticEvaluator(SyntheticTaskSpec spec) : spec_(std::move(spec)) {}

namespace {

uint64_t mix_seed(uint64_t seed, const std::string& instance_id) {
  uint64_t h = seed ^ 1469598103934665603ull;
  for (unsigned char c : instance_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

InstanceEval SyntheticEvaluator::run(const WorkflowGraph& graph,
                                     const DatasetInstance& instance) const {
  std::set<NodeId> present;
  for (const auto& n : graph.nodes) present.insert(n.id);

  std::set<NodeId> grouped;
  double score = 0.0;
  for (const auto& group : spec_.redundancy_groups) {
    double best = 0.0;
    for (const auto& member : group) {
      grouped.insert(member);
      if (present.count(member)) {
        auto it = spec_.contributions.find(member);
        if (it != spec_.contributions.end()) best = std::max(best, it->second);
      }
    }
    score += best;
  }
  for (const auto& [node, w] : spec_.contributions) {
    if (!grouped.count(node) && present.count(node)) score += w;
  }
  for (const auto& n : graph.nodes) {
    if (spec_.low_tier_models.count(n.model)) {
      auto it = spec_.quant_penalty.find(n.id);
      if (it != spec_.quant_penalty.end()) score -= it->second;
    }
  }
  if (spec_.noise_amplitude > 0.0) {
    std::mt19937_64 rng(mix_seed(spec_.seed, instance.id));
    std::uniform_real_distribution<double> noise(-spec_.noise_amplitude, spec_.noise_amplitude);
    score += noise(rng);
  }

  InstanceEval ev;
  ev.score = std::clamp(score, 0.0, 1.0);
  for (const auto& n : graph.nodes) {
    auto it = spec_.tokens.find(n.id);
    TokenProfile profile = it == spec_.tokens.end() ? TokenProfile{} : it->second;
    ev.calls.push_back({n.id, n.model, profile.input_tokens, profile.output_tokens});
  }
  return ev;
}

}  // namespace slim
