#pragma once

#include <optional>
#include <string>
#include <vector>

namespace slim {

struct BreakEven {
  bool defined = false;
  long long executions = 0;  // valid when defined
  std::string note;          // explanation when undefined
};

/// Number of future executions needed to amortize the one-time optimization
/// cost: C_optimize / (C_base - C_ours), rounded to the nearest integer.
/// Undefined when the per-query saving is not positive.
BreakEven break_even(double c_optimize, double c_base, double c_ours);

/// Relative cost reduction in percent, reported to one decimal.
double cost_reduction_percent(double c_base, double c_ours);

struct ScorePoint {
  double score = 0.0;
  double cost = 0.0;
  std::string label;
};

/// Maximal points under (score up, cost down) dominance, sorted by cost
/// ascending.
std::vector<ScorePoint> pareto_frontier(const std::vector<ScorePoint>& points);

struct EconScenario {
  std::string name;
  double c_optimize = 0.0;  // USD, one-time
  double c_base = 0.0;      // USD per problem
  double c_ours = 0.0;      // USD per problem
};

struct EconRow {
  std::string name;
  double c_base = 0.0;
  double c_ours = 0.0;
  double delta_c = 0.0;
  double reduction_percent = 0.0;  // one decimal
  double c_optimize = 0.0;
  BreakEven break_even;
};

struct EconReport {
  std::vector<EconRow> rows;
};

EconReport econ_report(const std::vector<EconScenario>& scenarios);

/// Scenario table: JSON array of {name, c_optimize, c_base, c_ours} with
/// monetary values as decimal strings or numbers.
std::vector<EconScenario> parse_scenarios(const std::string& text);
std::vector<EconScenario> load_scenarios(const std::string& path);

/// Plot-ready rendering: one line per row, tab separated.
std::string render_econ_report(const EconReport& report);

}  // namespace slim
