#include "slim/run_log.hpp"

#include <set>
#include <sstream>

namespace slim {

using json = nlohmann::json;

json step_to_json(const StepRecord& rec) {
  json j;
  j["type"] = "step";
  j["stage"] = rec.stage;
  j["iteration"] = rec.iteration;
  j["candidate"] = rec.candidate;
  j["action"] = rec.action;
  j["signals"] = {{"s_deg", rec.signals.s_deg},
                  {"s_bet", rec.signals.s_bet},
                  {"delta_score", rec.signals.delta_score},
                  {"delta_cost", rec.signals.delta_cost}};
  j["ranks"] = rec.ranks;
  j["fused"] = rec.fused;
  j["score_before"] = rec.score_before;
  j["cost_before"] = rec.cost_before;
  j["score_after"] = rec.score_after;
  j["cost_after"] = rec.cost_after;
  j["threshold"] = rec.threshold;
  j["verdict"] = rec.verdict;
  j["before_digest"] = rec.before_digest;
  j["after_digest"] = rec.after_digest;
  return j;
}

StepRecord step_from_json(const json& j) {
  StepRecord rec;
  rec.stage = j.at("stage").get<std::string>();
  rec.iteration = j.at("iteration").get<int>();
  rec.candidate = j.at("candidate").get<std::string>();
  rec.action = j.at("action").get<std::string>();
  const json& s = j.at("signals");
  rec.signals.node = rec.candidate;
  rec.signals.s_deg = s.at("s_deg").get<int>();
  rec.signals.s_bet = s.at("s_bet").get<double>();
  rec.signals.delta_score = s.at("delta_score").get<double>();
  rec.signals.delta_cost = s.at("delta_cost").get<double>();
  rec.ranks = j.at("ranks").get<std::map<std::string, int>>();
  rec.fused = j.at("fused").get<double>();
  rec.score_before = j.at("score_before").get<double>();
  rec.cost_before = j.at("cost_before").get<double>();
  rec.score_after = j.at("score_after").get<double>();
  rec.cost_after = j.at("cost_after").get<double>();
  rec.threshold = j.at("threshold").get<double>();
  rec.verdict = j.at("verdict").get<std::string>();
  rec.before_digest = j.at("before_digest").get<std::string>();
  rec.after_digest = j.at("after_digest").get<std::string>();
  return rec;
}

RunLogWriter::RunLogWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("cannot open run log '" + path + "' for writing");
}

void RunLogWriter::write_line(const json& record) {
  out_ << record.dump() << '\n';
  out_.flush();  // partial logs survive aborts
}

void RunLogWriter::write_header(const json& config_snapshot, const std::string& version,
                                const std::string& base_digest, const std::string& started_at) {
  write_line(json{{"type", "header"},
                  {"version", version},
                  {"base_digest", base_digest},
                  {"started_at", started_at},
                  {"config", config_snapshot}});
}

void RunLogWriter::write_step(const StepRecord& rec) { write_line(step_to_json(rec)); }

void RunLogWriter::write_summary(const std::string& chosen_digest, double score, double cost,
                                 const std::map<std::string, EvalCounts>& counts,
                                 bool budget_violated) {
  json jcounts;
  for (const auto& [stage, c] : counts) {
    jcounts[stage] = {{"probe_evals", c.probe_evals}, {"acceptance_evals", c.acceptance_evals}};
  }
  write_line(json{{"type", "summary"},
                  {"chosen_digest", chosen_digest},
                  {"score", score},
                  {"cost", cost},
                  {"eval_counts", jcounts},
                  {"budget_violated", budget_violated}});
}

void RunLogWriter::flush() { out_.flush(); }

ParsedRunLog read_run_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run log '" + path + "'");
  ParsedRunLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record = json::parse(line);
    const std::string type = record.value("type", "");
    if (type == "header") {
      log.header = record;
    } else if (type == "step") {
      log.steps.push_back(step_from_json(record));
    } else if (type == "summary") {
      log.summary = record;
    } else {
      throw std::runtime_error("unknown run log record type '" + type + "'");
    }
  }
  if (log.header.is_null()) throw std::runtime_error("run log has no header record");
  return log;
}

std::vector<std::string> audit_run_log(const ParsedRunLog& log) {
  std::vector<std::string> problems;
  std::string current = log.header.value("base_digest", "");
  std::set<std::string> seen{current};

  size_t index = 0;
  for (const auto& rec : log.steps) {
    index++;
    const std::string where = "step " + std::to_string(index) + " (" + rec.stage + ")";
    if (rec.stage == "tune") {
      // Tuner parents come from the whole pool, not the accepted chain.
      if (!seen.count(rec.before_digest))
        problems.push_back(where + ": parent digest " + rec.before_digest + " never seen");
    } else {
      if (rec.before_digest != current)
        problems.push_back(where + ": before digest " + rec.before_digest +
                           " does not match current state " + current);
      if (rec.verdict == "accepted") current = rec.after_digest;
    }
    if (rec.verdict == "accepted" && rec.stage != "tune" &&
        rec.score_after + 1e-9 < rec.threshold) {
      problems.push_back(where + ": accepted below threshold");
    }
    seen.insert(rec.after_digest);
  }

  if (!log.summary.is_null()) {
    const std::string chosen = log.summary.value("chosen_digest", "");
    if (!seen.count(chosen))
      problems.push_back("summary: chosen digest " + chosen + " never seen in the log");
  }
  return problems;
}

}  // namespace slim
