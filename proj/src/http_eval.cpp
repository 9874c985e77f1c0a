#include "slim/http_eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace slim {

using json = nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

double grade(const GraderConfig& grader, const std::string& output, const std::string& target) {
  if (grader.type == "exact") {
    return trim(output) == trim(target) ? 1.0 : 0.0;
  }
  if (grader.type == "numeric") {
    try {
      double a = std::stod(trim(output));
      double b = std::stod(trim(target));
      return std::abs(a - b) <= grader.tolerance ? 1.0 : 0.0;
    } catch (const std::exception&) {
      return 0.0;
    }
  }
  throw eval_error("unknown grader type '" + grader.type + "'");
}

HttpEvaluator::HttpEvaluator(HttpEvalConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    const char* base = std::getenv("SLIM_API_BASE");
    if (!base || !*base)
      throw eval_error("http evaluator needs a base url (config or SLIM_API_BASE)");
    config_.base_url = base;
  }
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (!key || !*key)
    throw eval_error("http evaluator credential missing: set " + config_.api_key_env);
  api_key_ = key;
  if (config_.max_attempts < 1) throw eval_error("http max_attempts must be >= 1");
}

InstanceEval HttpEvaluator::run(const WorkflowGraph& graph,
                                const DatasetInstance& instance) const {
  InstanceEval ev;
  std::map<NodeId, std::string> outputs;

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_sec, 0);
  client.set_read_timeout(config_.timeout_sec, 0);

  for (const NodeId& id : topo_order(graph)) {
    const WorkflowNode& node = *find_node(graph, id);
    if (node.operator_kind == op_kind::input) {
      outputs[id] = instance.input;
      continue;
    }

    std::ostringstream content;
    if (auto it = config_.prompts.find(node.prompt_ref); it != config_.prompts.end()) {
      content << it->second << "\n\n";
    }
    content << "Task:\n" << instance.input << "\n";
    for (const NodeId& pred : predecessors(graph, id)) {
      content << "\nOutput of " << pred << ":\n" << outputs[pred] << "\n";
    }

    json request = {{"model", node.model},
                    {"temperature", 0},
                    {"messages", json::array({{{"role", "user"},
                                               {"content", content.str()}}})}};
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    json response;
    std::string failure;
    bool done = false;
    for (int attempt = 0; attempt < config_.max_attempts && !done; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
      }
      auto res = client.Post(config_.completions_path, headers, request.dump(),
                             "application/json");
      if (!res) {
        failure = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        failure = "http status " + std::to_string(res->status);
        continue;
      }
      try {
        response = json::parse(res->body);
        done = true;
      } catch (const json::exception& ex) {
        // Malformed body is not retried.
        ev.error = "node '" + id + "': malformed response: " + ex.what();
        return ev;
      }
    }
    if (!done) {
      ev.error = "node '" + id + "': " + failure + " after " +
                 std::to_string(config_.max_attempts) + " attempts";
      return ev;
    }

    try {
      outputs[id] = response.at("choices").at(0).at("message").at("content").get<std::string>();
      const json& usage = response.at("usage");
      ev.calls.push_back({id, node.model, usage.at("prompt_tokens").get<int64_t>(),
                          usage.at("completion_tokens").get<int64_t>()});
    } catch (const json::exception& ex) {
      ev.error = "node '" + id + "': malformed response: " + ex.what();
      return ev;
    }
  }

  ev.score = grade(config_.grader, outputs[graph.final_id], instance.target);
  return ev;
}

}  // namespace slim
