#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "slim/http_eval.hpp"
#include "test_util.hpp"

using namespace slim;
using namespace slim::testutil;
using json = nlohmann::json;

namespace {

/// In-process chat-completions stub with a scripted responder.
class MockServer {
 public:
  using Responder = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockServer(Responder responder) {
    server_.Post("/v1/chat/completions",
                 [this, responder](const httplib::Request& req, httplib::Response& res) {
                   hits_++;
                   responder(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int hits() const { return hits_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
};

void ok_completion(httplib::Response& res, const std::string& content, int in_tokens,
                   int out_tokens) {
  json body = {{"choices", json::array({{{"message", {{"role", "assistant"},
                                                      {"content", content}}}}})},
               {"usage", {{"prompt_tokens", in_tokens}, {"completion_tokens", out_tokens}}}};
  res.set_content(body.dump(), "application/json");
}

WorkflowGraph single_call_graph() {
  WorkflowGraph g;
  g.nodes = {node("in", true), node("ans", true)};
  g.nodes[0].operator_kind = op_kind::input;
  g.nodes[1].operator_kind = op_kind::answer_generate;
  g.nodes[1].prompt_ref = "solve";
  g.edges = {{"in", "ans"}};
  g.entry_ids = {"in"};
  g.final_id = "ans";
  return normalize(std::move(g));
}

HttpEvalConfig base_config(const std::string& url) {
  setenv("SLIM_API_KEY", "test-key", 1);
  HttpEvalConfig cfg;
  cfg.base_url = url;
  cfg.max_attempts = 3;
  cfg.backoff_ms = 1;
  cfg.timeout_sec = 2;
  cfg.prompts["solve"] = "Answer the question.";
  return cfg;
}

}  // namespace

TEST_CASE("grade handles exact and numeric matching") {
  GraderConfig exact;
  CHECK(grade(exact, " 42 \n", "42") == 1.0);
  CHECK(grade(exact, "41", "42") == 0.0);

  GraderConfig numeric{"numeric", 1e-3};
  CHECK(grade(numeric, "3.1416", "3.14159") == 1.0);
  CHECK(grade(numeric, "3.2", "3.14159") == 0.0);
  CHECK(grade(numeric, "not a number", "3") == 0.0);

  CHECK_THROWS_AS(grade(GraderConfig{"fancy", 0}, "a", "a"), eval_error);
}

TEST_CASE("a scripted echo server yields graded scores and billed usage") {
  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body);
    CHECK(body.at("temperature").get<double>() == 0.0);
    CHECK(body.at("model").get<std::string>() == "m");
    CHECK(req.get_header_value("Authorization") == "Bearer test-key");
    std::string content = body.at("messages").at(0).at("content").get<std::string>();
    CHECK(content.find("Answer the question.") != std::string::npos);
    CHECK(content.find("what is 6*7") != std::string::npos);
    ok_completion(res, "42", 120, 30);
  });

  HttpEvaluator ev(base_config(server.base_url()));
  PricingTable pricing;
  pricing.rates["m"] = {1e-6, 2e-6};
  std::vector<DatasetInstance> instances = {{"q1", "what is 6*7", "42"}};
  EvalOutcome out = evaluate(single_call_graph(), instances, ev, pricing);

  CHECK(out.avg_score == doctest::Approx(1.0));
  CHECK(out.avg_cost_usd == doctest::Approx(120e-6 + 60e-6).epsilon(1e-9));
  CHECK(out.per_instance[0].input_tokens == 120);
  CHECK(out.per_instance[0].output_tokens == 30);
  CHECK(server.hits() == 1);
}

TEST_CASE("upstream outputs flow into downstream prompts in topo order") {
  MockServer server([](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body);
    std::string content = body.at("messages").at(0).at("content").get<std::string>();
    if (content.find("Output of mid") != std::string::npos) {
      CHECK(content.find("intermediate result") != std::string::npos);
      ok_completion(res, "final result", 10, 10);
    } else {
      ok_completion(res, "intermediate result", 10, 10);
    }
  });

  WorkflowGraph g;
  g.nodes = {node("in", true), node("mid"), node("ans", true)};
  g.nodes[0].operator_kind = op_kind::input;
  g.edges = {{"in", "mid"}, {"mid", "ans"}};
  g.entry_ids = {"in"};
  g.final_id = "ans";
  g = normalize(std::move(g));

  HttpEvaluator ev(base_config(server.base_url()));
  InstanceEval out = ev.run(g, {"q1", "question", "final result"});
  CHECK(out.error.empty());
  CHECK(out.score == 1.0);
  CHECK(out.calls.size() == 2);
  CHECK(server.hits() == 2);
}

TEST_CASE("transient server errors are retried with success on a later attempt") {
  std::atomic<int> calls{0};
  MockServer server([&calls](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
      return;
    }
    ok_completion(res, "42", 5, 5);
  });

  HttpEvaluator ev(base_config(server.base_url()));
  InstanceEval out = ev.run(single_call_graph(), {"q1", "what is 6*7", "42"});
  CHECK(out.error.empty());
  CHECK(out.score == 1.0);
  CHECK(server.hits() == 3);
}

TEST_CASE("persistent failures surface after the attempt budget") {
  MockServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("down", "text/plain");
  });

  HttpEvaluator ev(base_config(server.base_url()));
  InstanceEval out = ev.run(single_call_graph(), {"q1", "input", "42"});
  CHECK_FALSE(out.error.empty());
  CHECK(out.error.find("3 attempts") != std::string::npos);
  CHECK(server.hits() == 3);
  CHECK(out.score == 0.0);
}

TEST_CASE("an unreachable endpoint is an instance failure, not a crash") {
  HttpEvalConfig cfg = base_config("http://127.0.0.1:9");  // discard port, nothing listens
  cfg.timeout_sec = 1;
  HttpEvaluator ev(cfg);
  PricingTable pricing;
  pricing.rates["m"] = {1e-6, 2e-6};
  std::vector<DatasetInstance> instances = {{"q1", "input", "42"}};
  EvalOutcome out = evaluate(single_call_graph(), instances, ev, pricing);
  CHECK(out.avg_score == 0.0);
  CHECK_FALSE(out.per_instance[0].error.empty());
}

TEST_CASE("malformed response bodies fail without retry") {
  MockServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content("this is not json", "application/json");
  });

  HttpEvaluator ev(base_config(server.base_url()));
  InstanceEval out = ev.run(single_call_graph(), {"q1", "input", "42"});
  CHECK_FALSE(out.error.empty());
  CHECK(out.error.find("malformed") != std::string::npos);
  CHECK(server.hits() == 1);
}

TEST_CASE("missing credentials are rejected at construction") {
  unsetenv("SLIM_MISSING_KEY");
  HttpEvalConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.api_key_env = "SLIM_MISSING_KEY";
  CHECK_THROWS_AS(HttpEvaluator{cfg}, eval_error);

  unsetenv("SLIM_API_BASE");
  setenv("SLIM_API_KEY", "k", 1);
  HttpEvalConfig no_url;
  CHECK_THROWS_AS(HttpEvaluator{no_url}, eval_error);
}
