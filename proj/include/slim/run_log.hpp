#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "slim/compressor.hpp"

namespace slim {

nlohmann::json step_to_json(const StepRecord& rec);
StepRecord step_from_json(const nlohmann::json& j);

/// Line-delimited run log: one header record, then one record per step,
/// then one summary record. The header carries the only timestamp; every
/// line below it is replay-deterministic.
class RunLogWriter {
 public:
  explicit RunLogWriter(const std::string& path);

  void write_header(const nlohmann::json& config_snapshot, const std::string& version,
                    const std::string& base_digest, const std::string& started_at);
  void write_step(const StepRecord& rec);
  void write_summary(const std::string& chosen_digest, double score, double cost,
                     const std::map<std::string, EvalCounts>& counts, bool budget_violated);
  void flush();

 private:
  std::ofstream out_;
  void write_line(const nlohmann::json& record);
};

struct ParsedRunLog {
  nlohmann::json header;
  std::vector<StepRecord> steps;
  nlohmann::json summary;  // null when the run aborted before the summary
};

ParsedRunLog read_run_log(const std::string& path);

/// Digest-chain and threshold integrity check. Returns human-readable
/// problems; empty means the log is sound.
std::vector<std::string> audit_run_log(const ParsedRunLog& log);

}  // namespace slim
